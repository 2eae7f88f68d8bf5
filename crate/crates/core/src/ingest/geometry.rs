//! Spherical distances, the local planar projection, and the small amount of
//! polygon machinery the tessellation needs.

use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    pub fn is_valid(&self) -> bool {
        self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }
}

/// Great-circle distance in kilometres.
pub fn haversine(a: LonLat, b: LonLat) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Planar coordinates in kilometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Xy {
    pub x: f64,
    pub y: f64,
}

impl Xy {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(self, o: Xy) -> f64 {
        (self.x - o.x).powi(2) + (self.y - o.y).powi(2)
    }

    pub fn dist(self, o: Xy) -> f64 {
        self.dist2(o).sqrt()
    }
}

/// Equirectangular projection about a fixed origin, in kilometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    origin: LonLat,
    cos_lat0: f64,
}

impl Projection {
    pub fn about(origin: LonLat) -> Self {
        Self {
            origin,
            cos_lat0: origin.lat.to_radians().cos(),
        }
    }

    pub fn origin(&self) -> LonLat {
        self.origin
    }

    pub fn forward(&self, p: LonLat) -> Xy {
        let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        Xy::new(
            k * (p.lon - self.origin.lon) * self.cos_lat0,
            k * (p.lat - self.origin.lat),
        )
    }

    pub fn inverse(&self, p: Xy) -> LonLat {
        let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        LonLat::new(
            self.origin.lon + p.x / (k * self.cos_lat0),
            self.origin.lat + p.y / k,
        )
    }
}

/// Signed shoelace area; positive for counter-clockwise rings. The ring is
/// implicitly closed.
pub fn signed_area(ring: &[Xy]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..n {
        let (a, b) = (ring[k], ring[(k + 1) % n]);
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

pub fn area(ring: &[Xy]) -> f64 {
    signed_area(ring).abs()
}

/// Even-odd ray casting. Points exactly on the boundary may fall either way.
pub fn contains(ring: &[Xy], p: Xy) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the closed ring's boundary.
pub fn boundary_distance(ring: &[Xy], p: Xy) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|k| segment_distance(ring[k], ring[(k + 1) % n], p))
        .fold(f64::INFINITY, f64::min)
}

pub fn segment_distance(a: Xy, b: Xy, p: Xy) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Xy::new(a.x + t * dx, a.y + t * dy))
}

/// Inside test that also accepts points within `tol` km of the boundary.
pub fn covers(ring: &[Xy], p: Xy, tol: f64) -> bool {
    contains(ring, p) || boundary_distance(ring, p) <= tol
}

/// Returns the ring oriented counter-clockwise.
pub fn ccw(mut ring: Vec<Xy>) -> Vec<Xy> {
    if signed_area(&ring) < 0.0 {
        ring.reverse();
    }
    ring
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haversine_quarter_meridian() {
        let q = std::f64::consts::PI * EARTH_RADIUS_KM / 2.0;
        let d = haversine(LonLat::new(0.0, 0.0), LonLat::new(0.0, 90.0));
        assert!((d - 10007.54).abs() < 0.01, "{d}");
        assert!((d - q).abs() < 1e-9);
        let e = haversine(LonLat::new(0.0, 0.0), LonLat::new(90.0, 0.0));
        assert!((e - d).abs() < 1e-9);
    }

    #[test]
    fn haversine_identity_is_zero() {
        let p = LonLat::new(-5.3, 7.1);
        assert_eq!(haversine(p, p), 0.0);
    }

    #[test]
    fn projection_round_trips() {
        let proj = Projection::about(LonLat::new(-5.5, 7.5));
        let p = LonLat::new(-4.2, 6.1);
        let back = proj.inverse(proj.forward(p));
        assert!((back.lon - p.lon).abs() < 1e-12 && (back.lat - p.lat).abs() < 1e-12);
    }

    #[test]
    fn unit_square_area_and_containment() {
        let sq = vec![
            Xy::new(0.0, 0.0),
            Xy::new(1.0, 0.0),
            Xy::new(1.0, 1.0),
            Xy::new(0.0, 1.0),
        ];
        assert_eq!(signed_area(&sq), 1.0);
        assert!(contains(&sq, Xy::new(0.5, 0.5)));
        assert!(!contains(&sq, Xy::new(1.5, 0.5)));
        assert!(covers(&sq, Xy::new(1.0 + 1e-12, 0.5), 1e-9));
    }

    proptest::proptest! {
        #[test]
        fn haversine_symmetric_nonnegative(
            lon1 in -180.0f64..180.0, lat1 in -90.0f64..90.0,
            lon2 in -180.0f64..180.0, lat2 in -90.0f64..90.0,
        ) {
            let (a, b) = (LonLat::new(lon1, lat1), LonLat::new(lon2, lat2));
            let (ab, ba) = (haversine(a, b), haversine(b, a));
            proptest::prop_assert!(ab >= 0.0);
            proptest::prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
            if a != b {
                proptest::prop_assert!(ab > 0.0);
            }
        }
    }
}
