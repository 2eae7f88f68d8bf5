//! Dense least squares by Householder QR.

use crate::error::{validation, Error, Result};
use crate::scalar::Scalar;

/// Minimises `‖X b − y‖₂` for a tall design `x` (rows of equal length).
/// A column whose reduced diagonal falls below `sqrt(eps)` of the largest
/// column norm marks the design as rank deficient.
pub fn least_squares<T: Scalar>(x: &[Vec<T>], y: &[T]) -> Result<Vec<T>> {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    if n != y.len() || x.iter().any(|r| r.len() != p) {
        return Err(validation!("least squares: ragged design or length mismatch"));
    }
    if n < p || p == 0 {
        return Err(Error::Degenerate(format!(
            "least squares with {n} observations and {p} unknowns"
        )));
    }
    // Column-major working copy.
    let mut a: Vec<Vec<T>> = (0..p).map(|j| x.iter().map(|r| r[j]).collect()).collect();
    let mut b = y.to_vec();
    let scale = a
        .iter()
        .map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt())
        .fold(T::zero(), T::max);
    let tol = T::epsilon().sqrt() * scale;
    for k in 0..p {
        let norm = a[k][k..].iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(norm > tol) {
            return Err(Error::Degenerate(format!(
                "least-squares design is rank deficient at column {k}"
            )));
        }
        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&e| e * e).sum();
        let two = T::of(2.0);
        for col in a.iter_mut().skip(k) {
            let dot: T = v.iter().zip(&col[k..]).map(|(&vi, &ci)| vi * ci).sum();
            let f = two * dot / vnorm2;
            for (ci, &vi) in col[k..].iter_mut().zip(&v) {
                *ci -= f * vi;
            }
        }
        let dot: T = v.iter().zip(&b[k..]).map(|(&vi, &bi)| vi * bi).sum();
        let f = two * dot / vnorm2;
        for (bi, &vi) in b[k..].iter_mut().zip(&v) {
            *bi -= f * vi;
        }
    }
    let mut coef = vec![T::zero(); p];
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in k + 1..p {
            s -= a[j][k] * coef[j];
        }
        coef[k] = s / a[k][k];
    }
    Ok(coef)
}
