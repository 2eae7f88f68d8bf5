use serde::Serialize;

use crate::error::{validation, Result};

/// Log-binned histogram density estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdfEstimate {
    /// Ascending, `densities.len() + 1` entries.
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: usize,
}

impl PdfEstimate {
    pub fn total_mass(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    /// `bin_lo_km,bin_hi_km,count,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo_km,bin_hi_km,count,density\n");
        for (k, e) in self.bin_edges.windows(2).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", e[0], e[1], self.counts[k], self.densities[k]));
        }
        out
    }
}

/// Histogram with `bins_per_decade` logarithmic bins spanning the smallest
/// positive sample to the largest sample. Non-positive samples are ignored.
pub fn estimate_pdf(samples: &[f64], bins_per_decade: usize) -> Result<PdfEstimate> {
    if bins_per_decade == 0 {
        return Err(validation!("bins_per_decade must be positive"));
    }
    let xs: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|x| *x > 0.0 && x.is_finite())
        .collect();
    if xs.is_empty() {
        return Err(validation!("no positive samples to estimate a density from"));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(0.0, f64::max);
    let bpd = bins_per_decade as f64;
    let (lo_edge, hi_edge, n_bins) = if hi > lo {
        let decades = (hi / lo).log10();
        (lo, hi, ((decades * bpd).ceil() as usize).max(1))
    } else {
        // point mass: one bin centred (in log space) on the value
        let half = 10f64.powf(0.5 / bpd);
        (lo / half, lo * half, 1)
    };
    let ratio = (hi_edge / lo_edge).ln();
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|k| lo_edge * (ratio * k as f64 / n_bins as f64).exp())
        .collect();
    edges[0] = lo_edge;
    edges[n_bins] = hi_edge;
    let mut counts = vec![0u64; n_bins];
    for &x in &xs {
        let pos = ((x / lo_edge).ln() / ratio * n_bins as f64).floor();
        let mut k = (pos.max(0.0) as usize).min(n_bins - 1);
        // snap against rounding at the computed edges
        while k > 0 && x < edges[k] {
            k -= 1;
        }
        while k + 1 < n_bins && x >= edges[k + 1] {
            k += 1;
        }
        counts[k] += 1;
    }
    let n = xs.len() as f64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (n * (e[1] - e[0])))
        .collect();
    Ok(PdfEstimate {
        bin_edges: edges,
        densities,
        counts,
        n_samples: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_is_normalised() {
        let p = estimate_pdf(&[3.0; 17], 10).unwrap();
        assert_eq!(p.counts, vec![17]);
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_values_a_decade_apart() {
        let mut xs = vec![1.0; 50];
        xs.extend(vec![10.0; 50]);
        let p = estimate_pdf(&xs, 10).unwrap();
        let occupied: Vec<u64> = p.counts.iter().copied().filter(|&c| c > 0).collect();
        assert_eq!(occupied, vec![50, 50]);
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_no_positive_samples() {
        assert!(estimate_pdf(&[0.0, -1.0], 10).is_err());
    }

    proptest::proptest! {
        #[test]
        fn always_normalised(xs in proptest::collection::vec(1e-3f64..1e4, 1..300), bpd in 1usize..20) {
            let p = estimate_pdf(&xs, bpd).unwrap();
            proptest::prop_assert!((p.total_mass() - 1.0).abs() < 1e-9);
            proptest::prop_assert_eq!(p.counts.iter().sum::<u64>() as usize, xs.len());
            proptest::prop_assert!(p.densities.iter().all(|d| *d >= 0.0));
        }
    }
}
