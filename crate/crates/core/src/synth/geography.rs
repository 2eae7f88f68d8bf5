//! Planted regions, antenna layout and population landscape.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::SocietySpec;
use crate::error::{validation, Result};
use crate::ingest::{LonLat, Projection, RasterSample, Xy};

pub(crate) struct Geography {
    pub projection: Projection,
    /// Box corners in km: (min, max).
    pub lo: Xy,
    pub hi: Xy,
    pub tribe_centers: Vec<Xy>,
    /// `sub_centers[t][s]`.
    pub sub_centers: Vec<Vec<Xy>>,
    pub capital: Xy,
    pub antennas: Vec<Xy>,
    /// Planted (tribe, sub) per antenna.
    pub antenna_region: Vec<(usize, usize)>,
}

impl Geography {
    pub fn tribe_of(&self, p: Xy) -> usize {
        nearest(&self.tribe_centers, p)
    }

    pub fn region_of(&self, p: Xy) -> (usize, usize) {
        let t = self.tribe_of(p);
        (t, nearest(&self.sub_centers[t], p))
    }

    fn inside(&self, p: Xy) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y
    }

    fn uniform(&self, rng: &mut ChaCha8Rng) -> Xy {
        Xy::new(
            rng.random_range(self.lo.x..self.hi.x),
            rng.random_range(self.lo.y..self.hi.y),
        )
    }
}

fn nearest(centers: &[Xy], p: Xy) -> usize {
    (0..centers.len())
        .min_by(|&a, &b| p.dist2(centers[a]).total_cmp(&p.dist2(centers[b])))
        .expect("at least one center")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let d = rand_distr::StandardNormal;
    rng.sample::<f64, _>(d)
}

const MIN_ANTENNA_SPACING_KM: f64 = 0.15;
const TOWN_RADIUS_KM: f64 = 2.0;
const MAX_TRIES: usize = 100_000;

pub(crate) fn build(spec: &SocietySpec, rng: &mut ChaCha8Rng) -> Result<Geography> {
    let [w, s, e, n] = spec.bbox;
    let projection = Projection::about(LonLat::new((w + e) / 2.0, (s + n) / 2.0));
    let lo = projection.forward(LonLat::new(w, s));
    let hi = projection.forward(LonLat::new(e, n));
    let mut geo = Geography {
        projection,
        lo,
        hi,
        tribe_centers: vec![],
        sub_centers: vec![],
        capital: Xy::new(0.0, 0.0),
        antennas: vec![],
        antenna_region: vec![],
    };
    let (width, height) = (hi.x - lo.x, hi.y - lo.y);
    let n_tribes = spec.n_level1_regions;
    let n_sub = spec.n_subcommunities_per_region;

    // Tribe 0 hosts the capital and sits in the south-east corner so that it
    // does not border every other tribe.
    let tribe_sep = 0.7 * (width * height / n_tribes as f64).sqrt();
    let mut tries = 0;
    while geo.tribe_centers.len() < n_tribes {
        tries += 1;
        if tries > MAX_TRIES {
            return Err(validation!("could not place {n_tribes} separated level-1 centers"));
        }
        let p = if geo.tribe_centers.is_empty() {
            Xy::new(
                rng.random_range(lo.x + 0.75 * width..lo.x + 0.9 * width),
                rng.random_range(lo.y + 0.1 * height..lo.y + 0.25 * height),
            )
        } else {
            geo.uniform(rng)
        };
        if geo.tribe_centers.iter().all(|c| c.dist(p) >= tribe_sep) {
            geo.tribe_centers.push(p);
        }
    }

    let sub_sep = 0.35 * tribe_sep;
    for t in 0..n_tribes {
        let mut subs: Vec<Xy> = Vec::new();
        let mut tries = 0;
        while subs.len() < n_sub {
            tries += 1;
            if tries > MAX_TRIES {
                return Err(validation!("could not place sub-community centers in region {t}"));
            }
            let p = geo.uniform(rng);
            if geo.tribe_of(p) == t
                && subs.iter().all(|c| c.dist(p) >= sub_sep)
                && p.dist(geo.tribe_centers[t]) <= 0.6 * tribe_sep
            {
                subs.push(p);
            }
        }
        geo.sub_centers.push(subs);
    }
    geo.capital = geo.sub_centers[0][0];

    // Antenna quotas: a dense capital cluster, then the rest spread evenly
    // over sub-communities, each with a small town core and rural spread.
    let n_regions = n_tribes * n_sub;
    let n_capital = spec.n_capital_antennas.min(spec.n_antennas.saturating_sub(n_regions));
    let rest = spec.n_antennas - n_capital;
    let too_close = |ants: &[Xy], p: Xy| ants.iter().any(|a| a.dist(p) < MIN_ANTENNA_SPACING_KM);
    let place = |geo: &mut Geography, rng: &mut ChaCha8Rng, want: (usize, usize), gen: &dyn Fn(&mut ChaCha8Rng) -> Xy| -> Result<()> {
        for _ in 0..MAX_TRIES {
            let p = gen(rng);
            if geo.inside(p) && geo.region_of(p) == want && !too_close(&geo.antennas, p) {
                geo.antennas.push(p);
                geo.antenna_region.push(want);
                return Ok(());
            }
        }
        Err(validation!("could not place an antenna in region {want:?}"))
    };
    let capital = geo.capital;
    let radius = spec.capital_radius_km;
    for _ in 0..n_capital {
        place(&mut geo, rng, (0, 0), &|r: &mut ChaCha8Rng| {
            let (rad, th) = (radius * r.random::<f64>().sqrt(), r.random_range(0.0..std::f64::consts::TAU));
            Xy::new(capital.x + rad * th.cos(), capital.y + rad * th.sin())
        })?;
    }
    for k in 0..rest {
        let region = k % n_regions;
        let want = (region / n_sub, region % n_sub);
        let center = geo.sub_centers[want.0][want.1];
        let quota = rest / n_regions + usize::from(region < rest % n_regions);
        let town = (quota / 3).min(5);
        let rank = k / n_regions;
        if rank < town {
            place(&mut geo, rng, want, &|r: &mut ChaCha8Rng| {
                let (rad, th) = (TOWN_RADIUS_KM * r.random::<f64>().sqrt(), r.random_range(0.0..std::f64::consts::TAU));
                Xy::new(center.x + rad * th.cos(), center.y + rad * th.sin())
            })?;
        } else {
            let sd = spec.rural_spread_km;
            place(&mut geo, rng, want, &|r: &mut ChaCha8Rng| {
                Xy::new(center.x + sd * gaussian(r), center.y + sd * gaussian(r))
            })?;
        }
    }
    Ok(geo)
}

/// Gaussian population blobs at every sub-community center plus a dominant
/// capital blob, over a uniform background, sampled on a regular grid.
pub(crate) fn population(spec: &SocietySpec, geo: &Geography, rng: &mut ChaCha8Rng) -> Vec<RasterSample> {
    let blobs: Vec<(Xy, f64, f64)> = geo
        .sub_centers
        .iter()
        .flatten()
        .map(|&c| (c, rng.random_range(100.0..400.0), 15.0))
        .chain(std::iter::once((geo.capital, spec.capital_peak_density, 4.0)))
        .collect();
    let [w, s, e, n] = spec.bbox;
    let step = spec.raster_spacing_deg;
    let nx = ((e - w) / step).round() as usize;
    let ny = ((n - s) / step).round() as usize;
    let mut out = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            let ll = LonLat::new(w + (ix as f64 + 0.5) * step, s + (iy as f64 + 0.5) * step);
            let p = geo.projection.forward(ll);
            let density = if spec.uniform_population {
                spec.background_density
            } else {
                spec.background_density
                    + blobs
                        .iter()
                        .map(|&(c, peak, sd)| peak * (-p.dist2(c) / (2.0 * sd * sd)).exp())
                        .sum::<f64>()
            };
            out.push(RasterSample {
                lon: ll.lon,
                lat: ll.lat,
                density,
            });
        }
    }
    out
}

/// Moves the last antennas onto earlier ones so that groups of two or three
/// sit within a metre of each other. Returns the planted groups.
pub(crate) fn plant_colocated(spec: &SocietySpec, geo: &mut Geography, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n = geo.antennas.len();
    let mut groups = Vec::new();
    let mut donor = n;
    for g in 0..spec.n_colocated_groups {
        let anchor = g;
        let extra = if rng.random_bool(0.5) { 2 } else { 1 };
        let mut group = vec![anchor];
        for _ in 0..extra {
            if donor <= spec.n_colocated_groups + 1 {
                break;
            }
            donor -= 1;
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let off = 0.0003;
            let a = geo.antennas[anchor];
            geo.antennas[donor] = Xy::new(a.x + off * th.cos(), a.y + off * th.sin());
            geo.antenna_region[donor] = geo.antenna_region[anchor];
            group.push(donor);
        }
        groups.push(group);
    }
    groups
}
