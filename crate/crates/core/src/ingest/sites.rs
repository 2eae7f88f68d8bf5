use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use super::geometry::{covers, haversine, LonLat, Projection, Xy};
use crate::error::{validation, Error, Result};

/// A geolocated cell tower and the population assigned to its catchment.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaSite {
    pub id: String,
    pub position: LonLat,
    pub population: f64,
}

impl AntennaSite {
    pub fn new(id: impl Into<String>, lon: f64, lat: f64) -> Self {
        Self {
            id: id.into(),
            position: LonLat::new(lon, lat),
            population: 0.0,
        }
    }
}

/// Validated, immutable set of antennas inside a bounding polygon.
#[derive(Debug, Clone)]
pub struct AntennaRegistry {
    sites: Vec<AntennaSite>,
    bounds: Vec<LonLat>,
    index: HashMap<String, usize>,
    projection: Projection,
}

impl AntennaRegistry {
    pub fn new(sites: Vec<AntennaSite>, bounds: Vec<LonLat>) -> Result<Self> {
        if sites.len() < 2 {
            return Err(validation!("registry needs at least 2 sites, got {}", sites.len()));
        }
        if bounds.len() < 3 {
            return Err(validation!("bounding region needs at least 3 vertices"));
        }
        let mut index = HashMap::with_capacity(sites.len());
        for (k, s) in sites.iter().enumerate() {
            if !s.position.is_valid() {
                return Err(validation!(
                    "antenna {} has out-of-range coordinates ({}, {})",
                    s.id,
                    s.position.lon,
                    s.position.lat
                ));
            }
            if !(s.population >= 0.0 && s.population.is_finite()) {
                return Err(validation!("antenna {} has invalid population {}", s.id, s.population));
            }
            if index.insert(s.id.clone(), k).is_some() {
                return Err(validation!("duplicate antenna_id {}", s.id));
            }
        }
        let n = sites.len() as f64;
        let origin = LonLat::new(
            sites.iter().map(|s| s.position.lon).sum::<f64>() / n,
            sites.iter().map(|s| s.position.lat).sum::<f64>() / n,
        );
        let projection = Projection::about(origin);
        let ring: Vec<Xy> = bounds.iter().map(|&p| projection.forward(p)).collect();
        if let Some(s) = sites
            .iter()
            .find(|s| !covers(&ring, projection.forward(s.position), 1e-9))
        {
            return Err(validation!("antenna {} lies outside the bounding region", s.id));
        }
        Ok(Self {
            sites,
            bounds,
            index,
            projection,
        })
    }

    /// Uses the sites' bounding box, padded by 10% of its span (at least 0.01°).
    pub fn with_padded_bounds(sites: Vec<AntennaSite>) -> Result<Self> {
        let bounds = padded_bbox(sites.iter().map(|s| s.position));
        Self::new(sites, bounds)
    }

    pub fn sites(&self) -> &[AntennaSite] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn bounds(&self) -> &[LonLat] {
        &self.bounds
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn site(&self, k: usize) -> &AntennaSite {
        &self.sites[k]
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.sites.iter().map(|s| s.id.as_str())
    }

    pub fn projected(&self, k: usize) -> Xy {
        self.projection.forward(self.sites[k].position)
    }

    pub fn distance_km(&self, a: usize, b: usize) -> f64 {
        haversine(self.sites[a].position, self.sites[b].position)
    }

    pub fn total_population(&self) -> f64 {
        self.sites.iter().map(|s| s.population).sum()
    }

    /// Same geometry with new per-site populations (in site order).
    pub fn with_populations(&self, populations: &[f64]) -> Result<Self> {
        if populations.len() != self.sites.len() {
            return Err(validation!(
                "expected {} populations, got {}",
                self.sites.len(),
                populations.len()
            ));
        }
        let sites = self
            .sites
            .iter()
            .zip(populations)
            .map(|(s, &p)| AntennaSite {
                population: p,
                ..s.clone()
            })
            .collect();
        Self::new(sites, self.bounds.clone())
    }
}

pub(crate) fn padded_bbox(points: impl Iterator<Item = LonLat>) -> Vec<LonLat> {
    let (mut lo, mut hi) = (
        LonLat::new(f64::INFINITY, f64::INFINITY),
        LonLat::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in points {
        lo = LonLat::new(lo.lon.min(p.lon), lo.lat.min(p.lat));
        hi = LonLat::new(hi.lon.max(p.lon), hi.lat.max(p.lat));
    }
    let pad_lon = (0.1 * (hi.lon - lo.lon)).max(0.01);
    let pad_lat = (0.1 * (hi.lat - lo.lat)).max(0.01);
    let (w, e) = ((lo.lon - pad_lon).max(-180.0), (hi.lon + pad_lon).min(180.0));
    let (s, n) = ((lo.lat - pad_lat).max(-90.0), (hi.lat + pad_lat).min(90.0));
    vec![
        LonLat::new(w, s),
        LonLat::new(e, s),
        LonLat::new(e, n),
        LonLat::new(w, n),
    ]
}

#[derive(Deserialize)]
struct AntennaRow {
    antenna_id: String,
    lon: f64,
    lat: f64,
}

/// Reads `antenna_id,lon,lat` rows. Populations start at zero and the
/// bounding region is the padded bounding box of the sites.
pub fn load_antennas(path: impl AsRef<Path>) -> Result<AntennaRegistry> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut sites = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for rec in reader.deserialize::<AntennaRow>() {
        let row = rec.map_err(|e| csv_error(path, e))?;
        let line = sites.len() as u64 + 2;
        let site = AntennaSite::new(row.antenna_id, row.lon, row.lat);
        if !site.position.is_valid() {
            return Err(validation!(
                "{}:{line}: antenna {} coordinates ({}, {}) out of range",
                path.display(),
                site.id,
                row.lon,
                row.lat
            ));
        }
        if let Some(first) = seen.insert(site.id.clone(), line) {
            return Err(validation!(
                "{}:{line}: duplicate antenna_id {} (first on line {first})",
                path.display(),
                site.id
            ));
        }
        sites.push(site);
    }
    AntennaRegistry::with_padded_bounds(sites)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::parse(path, line, csv_kind_message(kind)),
    }
}

fn csv_kind_message(kind: csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        csv::ErrorKind::Utf8 { err, .. } => err.to_string(),
        other => format!("{other:?}"),
    }
}

/// Result of merging co-located antennas.
#[derive(Debug, Clone)]
pub struct Collapsed {
    pub registry: AntennaRegistry,
    /// Every original antenna id mapped to the id that now represents it.
    pub mapping: BTreeMap<String, String>,
}

impl Collapsed {
    pub fn merged_count(&self) -> usize {
        self.mapping.iter().filter(|(k, v)| k != v).count()
    }
}

/// Merges sites within `tol_m` metres of each other (transitively) into one
/// site at the members' centroid, named after the lexicographically smallest
/// member id. Repeats until no pair is within tolerance, so the result is a
/// fixed point.
pub fn collapse_colocated(reg: &AntennaRegistry, tol_m: f64) -> Result<Collapsed> {
    if !(tol_m >= 0.0) {
        return Err(validation!("co-location tolerance must be >= 0, got {tol_m}"));
    }
    let mut sites: Vec<AntennaSite> = reg.sites().to_vec();
    let mut mapping: BTreeMap<String, String> =
        sites.iter().map(|s| (s.id.clone(), s.id.clone())).collect();
    loop {
        let groups = colocated_groups(&sites, tol_m);
        if groups.iter().all(|g| g.len() == 1) {
            break;
        }
        let mut next = Vec::with_capacity(groups.len());
        for group in groups {
            let members: Vec<&AntennaSite> = group.iter().map(|&k| &sites[k]).collect();
            let id = members
                .iter()
                .map(|s| s.id.as_str())
                .min()
                .expect("group is nonempty")
                .to_owned();
            let m = members.len() as f64;
            let position = LonLat::new(
                members.iter().map(|s| s.position.lon).sum::<f64>() / m,
                members.iter().map(|s| s.position.lat).sum::<f64>() / m,
            );
            let population = members.iter().map(|s| s.population).sum();
            for s in &members {
                for target in mapping.values_mut() {
                    if *target == s.id {
                        *target = id.clone();
                    }
                }
            }
            next.push(AntennaSite {
                id,
                position,
                population,
            });
        }
        sites = next;
    }
    Ok(Collapsed {
        registry: AntennaRegistry::new(sites, reg.bounds().to_vec())?,
        mapping,
    })
}

/// Connected components of the "within tolerance" relation, ordered by their
/// first member.
fn colocated_groups(sites: &[AntennaSite], tol_m: f64) -> Vec<Vec<usize>> {
    let n = sites.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if haversine(sites[i].position, sites[j].position) * 1000.0 <= tol_m {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..n {
        let root = find(&mut parent, k);
        groups.entry(root).or_default().push(k);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_rows() {
        let f = write("antenna_id,lon,lat\nA,-5.0,7.0\nB,-4.0,7.5\n");
        let reg = load_antennas(f.path()).unwrap();
        assert_eq!(reg.len(), 2);
        assert_eq!(reg.index_of("B"), Some(1));
        assert_eq!(reg.site(0).population, 0.0);
    }

    #[test]
    fn rejects_latitude_out_of_range() {
        let f = write("antenna_id,lon,lat\nA,-5.0,95\nB,-4.0,7.5\n");
        assert!(matches!(load_antennas(f.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_duplicate_ids() {
        let f = write("antenna_id,lon,lat\nA,-5.0,7\nA,-4.0,7.5\n");
        let err = load_antennas(f.path()).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("duplicate")), "{err}");
    }

    #[test]
    fn malformed_row_names_its_line() {
        let f = write("antenna_id,lon,lat\nA,-5.0,7\nB,abc,7.5\n");
        match load_antennas(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn collapse_merges_identical_sites() {
        let reg = AntennaRegistry::with_padded_bounds(vec![
            AntennaSite::new("B", -5.0, 7.0),
            AntennaSite::new("A", -5.0, 7.0),
            AntennaSite::new("C", -4.0, 7.0),
        ])
        .unwrap();
        let c = collapse_colocated(&reg, 1.0).unwrap();
        assert_eq!(c.registry.len(), 2);
        assert_eq!(c.registry.site(0).id, "A");
        assert_eq!(c.mapping["B"], "A");
        assert_eq!(c.merged_count(), 1);
    }

    #[test]
    fn collapse_keeps_distant_sites() {
        // ~500 m apart in latitude
        let reg = AntennaRegistry::with_padded_bounds(vec![
            AntennaSite::new("A", -5.0, 7.0),
            AntennaSite::new("B", -5.0, 7.0045),
        ])
        .unwrap();
        let c = collapse_colocated(&reg, 1.0).unwrap();
        assert_eq!(c.registry.len(), 2);
        assert_eq!(c.merged_count(), 0);
    }

    proptest::proptest! {
        #[test]
        fn collapse_is_idempotent(
            pts in proptest::collection::vec((0u8..6, 0u8..6), 2..30),
            tol in 0.0f64..3000.0,
        ) {
            let sites: Vec<_> = pts.iter().enumerate()
                .map(|(k, &(x, y))| AntennaSite::new(format!("s{k:02}"), -5.0 + 0.01 * x as f64, 7.0 + 0.01 * y as f64))
                .collect();
            let reg = AntennaRegistry::with_padded_bounds(sites).unwrap();
            let once = match collapse_colocated(&reg, tol) {
                Ok(c) => c,
                // everything collapsed into a single site
                Err(Error::Validation(_)) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let twice = collapse_colocated(&once.registry, tol).unwrap();
            proptest::prop_assert_eq!(once.registry.sites(), twice.registry.sites());
        }
    }
}
