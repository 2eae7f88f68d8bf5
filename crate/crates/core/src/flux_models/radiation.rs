use super::{centroid_distances, check_alignment, FluxKind, FluxMatrix, RegionProfile};
use crate::error::{validation, Result};
use crate::matrix::SquareMatrix;
use crate::scalar::Scalar;

/// Off-diagonal row sums of observed flux.
pub fn observed_outflows<T: Scalar>(observed: &FluxMatrix<T>) -> Vec<T> {
    (0..observed.len())
        .map(|i| {
            (0..observed.len())
                .filter(|&j| j != i)
                .map(|j| observed.get(i, j))
                .sum()
        })
        .collect()
}

/// `s_ij`: population of regions other than `i` and `j` whose centroid lies
/// within `r_ij` of region `i`'s centroid.
pub fn intervening_population<T: Scalar>(profiles: &[RegionProfile<T>]) -> Result<SquareMatrix<T>> {
    let r = centroid_distances(profiles)?;
    let n = profiles.len();
    let mut s = SquareMatrix::zeros(n);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        order.sort_by(|&a, &b| r[(i, a)].partial_cmp(&r[(i, b)]).expect("finite distances"));
        // prefix[q] = population of the first q regions in distance order
        let mut prefix = vec![T::zero(); order.len() + 1];
        for (q, &k) in order.iter().enumerate() {
            prefix[q + 1] = prefix[q] + profiles[k].population;
        }
        let mut q = 0;
        for (pos, &j) in order.iter().enumerate() {
            // extend q past every region at distance <= r_ij (ties included)
            q = q.max(pos + 1);
            while q < order.len() && r[(i, order[q])] <= r[(i, j)] {
                q += 1;
            }
            s[(i, j)] = prefix[q] - profiles[j].population;
        }
    }
    Ok(s)
}

/// `T_ij = T_i · m_i n_j / ((m_i + s_ij)(m_i + n_j + s_ij))`, with `T_i` the
/// observed outflow of region `i`.
pub fn radiation_predict<T: Scalar>(profiles: &[RegionProfile<T>], outflows: &[T]) -> Result<FluxMatrix<T>> {
    if outflows.len() != profiles.len() {
        return Err(validation!(
            "{} outflows for {} regions",
            outflows.len(),
            profiles.len()
        ));
    }
    if outflows.iter().any(|&t| !(t >= T::zero())) {
        return Err(validation!("outflows must be >= 0"));
    }
    let s = intervening_population(profiles)?;
    let n = profiles.len();
    let values = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            return T::zero();
        }
        let (m, nj, sij) = (profiles[i].population, profiles[j].population, s[(i, j)]);
        let den = (m + sij) * (m + nj + sij);
        if den > T::zero() {
            outflows[i] * m * nj / den
        } else {
            T::zero()
        }
    });
    FluxMatrix::new(
        profiles.iter().map(|p| p.label.clone()).collect(),
        values,
        FluxKind::Modeled,
    )
}

/// Radiation prediction driven by the outflows of `observed`.
pub fn radiation_from_observed<T: Scalar>(
    observed: &FluxMatrix<T>,
    profiles: &[RegionProfile<T>],
) -> Result<FluxMatrix<T>> {
    check_alignment(observed, profiles)?;
    radiation_predict(profiles, &observed_outflows(observed))
}
