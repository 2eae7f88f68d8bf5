use serde::Serialize;

use super::lstsq::least_squares;
use super::{centroid_distances, check_alignment, FluxKind, FluxMatrix, RegionProfile};
use crate::error::{validation, Error, Result};
use crate::matrix::SquareMatrix;
use crate::scalar::Scalar;

/// `T_ij = scale · m_i^α · n_j^β / r_ij^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GravityParams<T> {
    pub alpha: T,
    pub beta_g: T,
    pub gamma: T,
    pub scale: T,
}

impl<T: Scalar> GravityParams<T> {
    pub fn new(alpha: T, beta_g: T, gamma: T, scale: T) -> Result<Self> {
        let p = Self {
            alpha,
            beta_g,
            gamma,
            scale,
        };
        if ![alpha, beta_g, gamma, scale].iter().all(|v| v.is_finite()) || !(scale > T::zero()) {
            return Err(validation!("gravity parameters must be finite with scale > 0"));
        }
        Ok(p)
    }
}

pub fn gravity_predict<T: Scalar>(
    params: &GravityParams<T>,
    profiles: &[RegionProfile<T>],
) -> Result<FluxMatrix<T>> {
    let r = centroid_distances(profiles)?;
    let n = profiles.len();
    let values = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            T::zero()
        } else {
            params.scale * profiles[i].population.powf(params.alpha) * profiles[j].population.powf(params.beta_g)
                / r[(i, j)].powf(params.gamma)
        }
    });
    FluxMatrix::new(
        profiles.iter().map(|p| p.label.clone()).collect(),
        values,
        FluxKind::Modeled,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GravityFit<T> {
    pub params: GravityParams<T>,
    /// Off-diagonal entries with positive observed flux used in the fit.
    pub n_fitted: usize,
    /// Off-diagonal entries excluded for zero observed flux.
    pub n_zero_excluded: usize,
}

/// Log-linear least squares on the positive off-diagonal entries:
/// `ln T = ln scale + α ln m_i + β ln n_j − γ ln r_ij`.
pub fn gravity_fit<T: Scalar>(observed: &FluxMatrix<T>, profiles: &[RegionProfile<T>]) -> Result<GravityFit<T>> {
    check_alignment(observed, profiles)?;
    let r = centroid_distances(profiles)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut n_zero = 0;
    for (i, j) in observed.values.off_diagonal() {
        let t = observed.get(i, j);
        if t > T::zero() {
            let (mi, nj) = (profiles[i].population, profiles[j].population);
            if !(mi > T::zero() && nj > T::zero()) {
                return Err(validation!(
                    "positive flux {}->{} between regions without population",
                    profiles[i].label,
                    profiles[j].label
                ));
            }
            x.push(vec![T::one(), mi.ln(), nj.ln(), -r[(i, j)].ln()]);
            y.push(t.ln());
        } else {
            n_zero += 1;
        }
    }
    if x.len() < 10 {
        return Err(validation!(
            "gravity fit needs at least 10 positive off-diagonal entries, got {}",
            x.len()
        ));
    }
    let c = least_squares(&x, &y).map_err(|e| match e {
        Error::Degenerate(m) => Error::Degenerate(format!("gravity fit: {m}")),
        other => other,
    })?;
    Ok(GravityFit {
        params: GravityParams::new(c[1], c[2], c[3], c[0].exp())?,
        n_fitted: x.len(),
        n_zero_excluded: n_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::LonLat;

    fn profile(label: &str, pop: f64, lon: f64, lat: f64) -> RegionProfile<f64> {
        RegionProfile {
            label: label.into(),
            population: pop,
            centroid: LonLat { lon, lat },
            members: vec![label.into()],
        }
    }

    #[test]
    fn distance_free_product() {
        let p = [profile("a", 10.0, 0.0, 0.0), profile("b", 20.0, 1.0, 0.0)];
        let g = GravityParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let t = gravity_predict(&g, &p).unwrap();
        assert!((t.get(0, 1) - 200.0).abs() < 1e-9 && (t.get(1, 0) - 200.0).abs() < 1e-9);
        assert_eq!(t.get(0, 0), 0.0);
    }

    #[test]
    fn doubling_distance_quarters_flux() {
        let g = GravityParams::new(1.0, 1.0, 2.0, 1.0).unwrap();
        let near = gravity_predict(&g, &[profile("a", 5.0, 0.0, 0.0), profile("b", 7.0, 0.0, 0.5)]).unwrap();
        let far = gravity_predict(&g, &[profile("a", 5.0, 0.0, 0.0), profile("b", 7.0, 0.0, 1.0)]).unwrap();
        assert!((near.get(0, 1) / far.get(0, 1) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn coincident_centroids_named() {
        let g = GravityParams::new(1.0, 1.0, 2.0, 1.0).unwrap();
        let err = gravity_predict(&g, &[profile("a", 5.0, 0.0, 0.0), profile("b", 7.0, 0.0, 0.0)])
            .unwrap_err()
            .to_string();
        assert!(err.contains("a") && err.contains("b"), "{err}");
    }

    #[test]
    fn equal_populations_are_degenerate() {
        let p: Vec<_> = (0..6).map(|k| profile(&format!("r{k}"), 100.0, k as f64 * 0.3, (k * k) as f64 * 0.1)).collect();
        let g = GravityParams::new(1.0, 1.0, 2.0, 1.0).unwrap();
        let t = gravity_predict(&g, &p).unwrap();
        let obs = FluxMatrix::new(t.regions.clone(), t.values.clone(), FluxKind::Observed).unwrap();
        assert!(matches!(gravity_fit(&obs, &p), Err(Error::Degenerate(_))));
    }
}
