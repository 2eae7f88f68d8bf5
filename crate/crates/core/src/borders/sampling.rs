//! Border polylines from the tessellation and IDW sampling of the field on them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::BorderStrengthField;
use crate::error::{validation, Result};
use crate::ingest::{LonLat, PartitionScheme, VoronoiTessellation, Xy};
use crate::scalar::Scalar;

/// Endpoint snapping distance (km) when chaining edges.
const SNAP_KM: f64 = 1e-6;

/// A chain of shared Voronoi edges between cells of two different regions.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderPolyline {
    /// Region labels in ascending order.
    pub border_id: (String, String),
    pub xy: Vec<Xy>,
    pub lonlat: Vec<LonLat>,
}

impl BorderPolyline {
    pub fn length_km(&self) -> f64 {
        self.xy.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// Every Voronoi edge whose cells carry different labels, chained into
/// polylines per label pair. Output is ordered by border id, then by each
/// polyline's first vertex.
pub fn border_polylines(tess: &VoronoiTessellation, scheme: &PartitionScheme) -> Result<Vec<BorderPolyline>> {
    let labels: Vec<&str> = tess
        .ids()
        .iter()
        .map(|id| {
            scheme
                .label_of(id)
                .ok_or_else(|| validation!("partition {} has no label for antenna {id}", scheme.name()))
        })
        .collect::<Result<_>>()?;
    let mut groups: BTreeMap<(&str, &str), Vec<(Xy, Xy)>> = BTreeMap::new();
    for e in tess.shared_edges() {
        let (la, lb) = (labels[e.a], labels[e.b]);
        if la != lb {
            groups.entry((la.min(lb), la.max(lb))).or_default().push((e.p, e.q));
        }
    }
    let projection = tess.projection();
    let mut out = Vec::new();
    for ((a, b), segments) in groups {
        let mut chains = chain_segments(segments);
        chains.sort_by(|p, q| p[0].x.total_cmp(&q[0].x).then(p[0].y.total_cmp(&q[0].y)));
        for xy in chains {
            out.push(BorderPolyline {
                border_id: (a.to_owned(), b.to_owned()),
                lonlat: xy.iter().map(|&p| projection.inverse(p)).collect(),
                xy,
            });
        }
    }
    Ok(out)
}

/// Greedy endpoint chaining. Chains start from an endpoint used by a single
/// segment when one exists, so open borders come out in one piece.
fn chain_segments(mut segs: Vec<(Xy, Xy)>) -> Vec<Vec<Xy>> {
    let near = |p: Xy, q: Xy| p.dist(q) <= SNAP_KM;
    let degree = |p: Xy, segs: &[(Xy, Xy)]| {
        segs.iter()
            .filter(|(a, b)| near(*a, p) || near(*b, p))
            .count()
    };
    let mut chains = Vec::new();
    while !segs.is_empty() {
        let start = (0..segs.len())
            .flat_map(|k| [(k, false), (k, true)])
            .find(|&(k, flip)| {
                let p = if flip { segs[k].1 } else { segs[k].0 };
                degree(p, &segs) == 1
            })
            .unwrap_or((0, false));
        let (a, b) = segs.swap_remove(start.0);
        let (a, b) = if start.1 { (b, a) } else { (a, b) };
        let mut chain = vec![a, b];
        loop {
            let tail = *chain.last().expect("nonempty");
            let Some(k) = segs.iter().position(|(p, q)| near(*p, tail) || near(*q, tail)) else {
                break;
            };
            let (p, q) = segs.swap_remove(k);
            chain.push(if near(p, tail) { q } else { p });
        }
        chains.push(chain);
    }
    chains
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingOptions {
    pub spacing_km: f64,
    pub k_neighbors: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            spacing_km: 5.0,
            k_neighbors: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorderSample {
    pub lon: f64,
    pub lat: f64,
    pub s: f64,
    pub border_id: (String, String),
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub n_samples: usize,
    pub n_positive: usize,
    pub mean_positive: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorderSampleSet {
    pub samples: Vec<BorderSample>,
    pub groups: BTreeMap<String, GroupSummary>,
    /// Over all samples.
    pub mean_positive: Option<f64>,
    pub spacing_km: f64,
    pub k_neighbors: usize,
    pub idw_power: f64,
}

fn summarize<'a>(values: impl Iterator<Item = &'a f64>) -> GroupSummary {
    let mut n = 0;
    let mut pos = Vec::new();
    for &v in values {
        n += 1;
        if v > 0.0 {
            pos.push(v);
        }
    }
    GroupSummary {
        n_samples: n,
        n_positive: pos.len(),
        mean_positive: (!pos.is_empty()).then(|| pos.iter().sum::<f64>() / pos.len() as f64),
    }
}

impl BorderSampleSet {
    /// GeoJSON Point features carrying `s`, `border_id` and `group`.
    pub fn to_geojson(&self) -> serde_json::Value {
        let features: Vec<_> = self
            .samples
            .iter()
            .map(|s| {
                json!({
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [s.lon, s.lat]},
                    "properties": {
                        "s": s.s,
                        "border_id": format!("{}|{}", s.border_id.0, s.border_id.1),
                        "group": s.group,
                    }
                })
            })
            .collect();
        json!({
            "type": "FeatureCollection",
            "properties": {
                "interpolation": "inverse-distance",
                "idw_power": self.idw_power,
                "k_neighbors": self.k_neighbors,
                "spacing_km": self.spacing_km,
            },
            "features": features,
        })
    }
}

/// Points at arc lengths `0, d, 2d, …` along each polyline, valued by the
/// inverse-distance (power 1) mean of `s` over the `k` nearest antennas
/// where it is defined.
///
/// Samples are grouped by border id, or into `capital` / `other` when
/// `capital_regions` is non-empty (a border touching any of those labels is a
/// capital border).
pub fn sample_border_strength<T: Scalar>(
    field: &BorderStrengthField<T>,
    tess: &VoronoiTessellation,
    polylines: &[BorderPolyline],
    opts: &SamplingOptions,
    capital_regions: &[String],
) -> Result<BorderSampleSet> {
    if !(opts.spacing_km > 0.0) || opts.k_neighbors == 0 {
        return Err(validation!("sampling needs spacing_km > 0 and k >= 1"));
    }
    let known: Vec<(Xy, f64)> = tess
        .ids()
        .iter()
        .enumerate()
        .filter_map(|(k, id)| field.value_of(id).map(|v| (tess.site_xy(k), v.as_f64())))
        .collect();
    if known.is_empty() {
        return Err(validation!("no antenna has a defined border strength"));
    }
    let k = opts.k_neighbors.min(known.len());
    let projection = tess.projection();
    let group_of = |id: &(String, String)| {
        if capital_regions.is_empty() {
            format!("{}|{}", id.0, id.1)
        } else if capital_regions.iter().any(|c| *c == id.0 || *c == id.1) {
            "capital".to_owned()
        } else {
            "other".to_owned()
        }
    };

    let samples: Vec<BorderSample> = polylines
        .par_iter()
        .flat_map_iter(|line| {
            let group = group_of(&line.border_id);
            points_along(&line.xy, opts.spacing_km)
                .into_iter()
                .map(|p| {
                    let ll = projection.inverse(p);
                    BorderSample {
                        lon: ll.lon,
                        lat: ll.lat,
                        s: idw(&known, p, k),
                        border_id: line.border_id.clone(),
                        group: group.clone(),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in &samples {
        by_group.entry(s.group.clone()).or_default().push(s.s);
    }
    Ok(BorderSampleSet {
        mean_positive: summarize(samples.iter().map(|s| &s.s)).mean_positive,
        groups: by_group.iter().map(|(g, v)| (g.clone(), summarize(v.iter()))).collect(),
        samples,
        spacing_km: opts.spacing_km,
        k_neighbors: opts.k_neighbors,
        idw_power: 1.0,
    })
}

fn points_along(line: &[Xy], spacing: f64) -> Vec<Xy> {
    let mut out = Vec::new();
    let mut next = 0.0;
    let mut walked = 0.0;
    for w in line.windows(2) {
        let len = w[0].dist(w[1]);
        while next <= walked + len {
            let t = if len > 0.0 { (next - walked) / len } else { 0.0 };
            out.push(Xy::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y)));
            next += spacing;
        }
        walked += len;
    }
    out
}

fn idw(known: &[(Xy, f64)], p: Xy, k: usize) -> f64 {
    let mut d: Vec<(f64, f64)> = known.iter().map(|&(q, v)| (q.dist(p), v)).collect();
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
    let nearest = &mut d[..k];
    nearest.sort_by(|a, b| a.0.total_cmp(&b.0));
    if nearest[0].0 == 0.0 {
        return nearest[0].1;
    }
    let (num, den) = nearest
        .iter()
        .fold((0.0, 0.0), |(n, w), &(dist, v)| (n + v / dist, w + 1.0 / dist));
    num / den
}

/// Counts per value bin over `[-1, 1]` for one sample group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorderHistogram {
    pub group: String,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Samples outside `[-1, 1]`, left out of the bins.
    pub n_out_of_range: usize,
    pub mean_positive: Option<f64>,
}

impl BorderHistogram {
    pub fn bin_bounds(&self, k: usize) -> (f64, f64) {
        (-1.0 + k as f64 * self.bin_width, -1.0 + (k + 1) as f64 * self.bin_width)
    }
}

/// One histogram per sample group plus an `all` histogram, in that order.
pub fn border_histogram(samples: &BorderSampleSet, bin_width: f64) -> Result<Vec<BorderHistogram>> {
    if samples.samples.is_empty() {
        return Err(validation!("no border samples to histogram"));
    }
    let nb = (2.0 / bin_width).round();
    if !(bin_width > 0.0) || (nb * bin_width - 2.0).abs() > 1e-9 {
        return Err(validation!("bin width {bin_width} does not divide [-1, 1]"));
    }
    let nb = nb as usize;
    let build = |group: &str, values: Vec<f64>| {
        let mut counts = vec![0u64; nb];
        let mut out = 0;
        for &v in &values {
            if !(-1.0..=1.0).contains(&v) {
                out += 1;
                continue;
            }
            let k = (((v + 1.0) / bin_width).floor() as usize).min(nb - 1);
            counts[k] += 1;
        }
        BorderHistogram {
            group: group.to_owned(),
            bin_width,
            counts,
            n_out_of_range: out,
            mean_positive: summarize(values.iter()).mean_positive,
        }
    };
    let mut hist: Vec<BorderHistogram> = samples
        .groups
        .keys()
        .map(|g| {
            build(
                g,
                samples.samples.iter().filter(|s| s.group == *g).map(|s| s.s).collect(),
            )
        })
        .collect();
    hist.push(build("all", samples.samples.iter().map(|s| s.s).collect()));
    Ok(hist)
}

/// `bin_lo,bin_hi,count,border_group`.
pub fn histograms_to_csv(hists: &[BorderHistogram]) -> String {
    let mut out = String::from("bin_lo,bin_hi,count,border_group\n");
    for h in hists {
        for (k, c) in h.counts.iter().enumerate() {
            let (lo, hi) = h.bin_bounds(k);
            out.push_str(&format!("{lo:.4},{hi:.4},{c},{}\n", h.group));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_voronoi, AntennaRegistry, AntennaSite};

    fn field(ids: &[&str], values: &[Option<f64>]) -> BorderStrengthField<f64> {
        BorderStrengthField {
            scheme_name: "s".into(),
            node_ids: ids.iter().map(|s| s.to_string()).collect(),
            assigned: vec!["x".into(); ids.len()],
            values: values.to_vec(),
            best_foreign: vec![None; ids.len()],
            findings: vec![],
        }
    }

    fn two_site() -> (AntennaRegistry, VoronoiTessellation, PartitionScheme) {
        let reg = AntennaRegistry::new(
            vec![AntennaSite::new("a", -0.5, 0.0), AntennaSite::new("b", 0.5, 0.0)],
            vec![
                LonLat::new(-1.0, -1.0),
                LonLat::new(1.0, -1.0),
                LonLat::new(1.0, 1.0),
                LonLat::new(-1.0, 1.0),
            ],
        )
        .unwrap();
        let tess = build_voronoi(&reg).unwrap();
        let scheme = PartitionScheme::from_pairs("s", [("a", "A"), ("b", "B")]).unwrap();
        (reg, tess, scheme)
    }

    #[test]
    fn bisector_border() {
        let (_, tess, scheme) = two_site();
        let lines = border_polylines(&tess, &scheme).unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].border_id, ("A".to_string(), "B".to_string()));
        for p in &lines[0].lonlat {
            assert!(p.lon.abs() < 1e-9);
        }
        let len = lines[0].length_km();
        assert!((len - 2.0 * 111.19492664455873).abs() < 1e-6, "{len}");
    }

    #[test]
    fn no_border_in_one_region() {
        let (_, tess, _) = two_site();
        let one = PartitionScheme::new_unchecked(
            "one",
            [("a".to_string(), "A".to_string()), ("b".to_string(), "A".to_string())].into(),
        );
        assert!(border_polylines(&tess, &one).unwrap().is_empty());
    }

    #[test]
    fn symmetric_values_cancel() {
        let (_, tess, scheme) = two_site();
        let lines = border_polylines(&tess, &scheme).unwrap();
        let f = field(&["a", "b"], &[Some(0.4), Some(-0.4)]);
        let opts = SamplingOptions {
            spacing_km: 5.0,
            k_neighbors: 2,
        };
        let set = sample_border_strength(&f, &tess, &lines, &opts, &[]).unwrap();
        assert!(!set.samples.is_empty());
        for s in &set.samples {
            assert!(s.s.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_everywhere() {
        let (_, tess, scheme) = two_site();
        let lines = border_polylines(&tess, &scheme).unwrap();
        let f = field(&["a", "b"], &[Some(0.3), Some(0.3)]);
        let set = sample_border_strength(&f, &tess, &lines, &SamplingOptions::default(), &[]).unwrap();
        // 222.4 km at 5 km spacing
        assert_eq!(set.samples.len(), 45);
        assert!(set.samples.iter().all(|s| (s.s - 0.3).abs() < 1e-12));
        assert!((set.mean_positive.unwrap() - 0.3).abs() < 1e-12);
        assert!((set.groups["A|B"].mean_positive.unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn no_defined_values_is_an_error() {
        let (_, tess, scheme) = two_site();
        let lines = border_polylines(&tess, &scheme).unwrap();
        let f = field(&["a", "b"], &[None, None]);
        assert!(sample_border_strength(&f, &tess, &lines, &SamplingOptions::default(), &[]).is_err());
    }

    fn set_of(values: &[f64]) -> BorderSampleSet {
        let samples: Vec<_> = values
            .iter()
            .map(|&s| BorderSample {
                lon: 0.0,
                lat: 0.0,
                s,
                border_id: ("A".into(), "B".into()),
                group: "g".into(),
            })
            .collect();
        BorderSampleSet {
            groups: [("g".to_string(), summarize(values.iter()))].into(),
            mean_positive: None,
            samples,
            spacing_km: 5.0,
            k_neighbors: 8,
            idw_power: 1.0,
        }
    }

    #[test]
    fn histogram_point_mass_and_symmetry() {
        let h = border_histogram(&set_of(&[0.42, 0.42, 0.42]), 0.05).unwrap();
        assert_eq!(h[0].counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h[0].counts.len(), 40);
        let h = border_histogram(&set_of(&[-0.33, 0.33, -0.71, 0.71]), 0.05).unwrap();
        let c = &h[0].counts;
        assert!((0..40).all(|k| c[k] == c[39 - k]));
        assert_eq!(h.last().unwrap().group, "all");
    }

    #[test]
    fn out_of_range_values_are_reported() {
        let h = border_histogram(&set_of(&[1.5, 0.0, 1.0]), 0.05).unwrap();
        assert_eq!(h[0].n_out_of_range, 1);
        assert_eq!(h[0].counts[39], 1);
        assert_eq!(h[0].counts[20], 1);
    }
}
