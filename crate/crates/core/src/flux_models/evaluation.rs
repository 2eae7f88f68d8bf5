use std::collections::BTreeMap;

use serde::Serialize;

use super::{centroid_distances, check_alignment, FluxMatrix, RegionProfile};
use crate::error::{validation, Result};
use crate::ingest::{AntennaRegistry, PartitionScheme};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapeReport<T> {
    /// Percent.
    pub mape: T,
    pub n_compared: usize,
    /// Entries skipped because the observed value is 0.
    pub n_zero_excluded: usize,
}

fn check_same_regions<T: Scalar>(a: &FluxMatrix<T>, b: &FluxMatrix<T>) -> Result<()> {
    if a.regions != b.regions {
        return Err(validation!("observed and modeled flux cover different regions"));
    }
    Ok(())
}

/// Mean absolute percentage error over the given entries with positive
/// observed flux.
pub fn mape_over<T: Scalar>(
    observed: &FluxMatrix<T>,
    modeled: &FluxMatrix<T>,
    entries: &[(usize, usize)],
) -> Result<MapeReport<T>> {
    check_same_regions(observed, modeled)?;
    let mut sum = T::zero();
    let mut n = 0;
    let mut zeros = 0;
    for &(i, j) in entries {
        let a = observed.get(i, j);
        if a > T::zero() {
            sum += (a - modeled.get(i, j)).abs() / a;
            n += 1;
        } else {
            zeros += 1;
        }
    }
    if n == 0 {
        return Err(validation!("MAPE comparison set is empty"));
    }
    Ok(MapeReport {
        mape: T::of(100.0) * sum / T::of_count(n),
        n_compared: n,
        n_zero_excluded: zeros,
    })
}

/// MAPE over all off-diagonal entries.
pub fn mape<T: Scalar>(observed: &FluxMatrix<T>, modeled: &FluxMatrix<T>) -> Result<MapeReport<T>> {
    let entries: Vec<_> = observed.values.off_diagonal().collect();
    mape_over(observed, modeled, &entries)
}

/// Each value divided by the largest; labels preserved.
pub fn normalized_mapes<T: Scalar>(mapes: &[(String, T)]) -> Vec<(String, T)> {
    let max = mapes.iter().map(|(_, v)| *v).fold(T::zero(), T::max);
    mapes
        .iter()
        .map(|(k, v)| (k.clone(), if max > T::zero() { *v / max } else { T::zero() }))
        .collect()
}

/// Majority level-1 label of each region of `scheme`; ties go to the
/// lexicographically smallest label.
pub fn level1_of_regions(
    reg: &AntennaRegistry,
    scheme: &PartitionScheme,
    level1: &PartitionScheme,
) -> Result<BTreeMap<String, String>> {
    let regions = scheme.labels_for(reg)?;
    let tops = level1.labels_for(reg)?;
    let mut votes: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for (r, t) in regions.iter().zip(&tops) {
        *votes.entry(r).or_default().entry(t).or_insert(0) += 1;
    }
    Ok(votes
        .into_iter()
        .map(|(r, v)| {
            let best = v.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).unwrap();
            (r.to_owned(), best.0.to_string())
        })
        .collect())
}

/// Off-diagonal entries split by whether both regions share a level-1 label.
pub fn split_intra_inter<T: Scalar>(
    flux: &FluxMatrix<T>,
    level1: &BTreeMap<String, String>,
) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    let tops: Vec<&String> = flux
        .regions
        .iter()
        .map(|r| level1.get(r).ok_or_else(|| validation!("region {r} has no level-1 label")))
        .collect::<Result<_>>()?;
    Ok(flux.values.off_diagonal().partition(|&(i, j)| tops[i] == tops[j]))
}

/// Mean modeled/observed ratio inside and across level-1 groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffinityBias<T> {
    pub s_intra: T,
    pub s_inter: T,
    /// Symmetric percent difference `200 |S_inter − S_intra| / (S_inter + S_intra)`.
    pub d: T,
    pub n_intra: usize,
    pub n_inter: usize,
    pub n_zero_excluded: usize,
}

pub fn affinity_bias<T: Scalar>(
    observed: &FluxMatrix<T>,
    modeled: &FluxMatrix<T>,
    level1: &BTreeMap<String, String>,
) -> Result<AffinityBias<T>> {
    check_same_regions(observed, modeled)?;
    let (intra, inter) = split_intra_inter(observed, level1)?;
    let mut zeros = 0;
    let mut mean_ratio = |entries: &[(usize, usize)], which: &str| -> Result<(T, usize)> {
        let mut sum = T::zero();
        let mut n = 0;
        for &(i, j) in entries {
            let t = observed.get(i, j);
            if t > T::zero() {
                sum += modeled.get(i, j) / t;
                n += 1;
            } else {
                zeros += 1;
            }
        }
        if n == 0 {
            return Err(validation!("{which} comparison set is empty"));
        }
        Ok((sum / T::of_count(n), n))
    };
    let (s_intra, n_intra) = mean_ratio(&intra, "intra")?;
    let (s_inter, n_inter) = mean_ratio(&inter, "inter")?;
    let total = s_inter + s_intra;
    let d = if total > T::zero() {
        T::of(200.0) * (s_inter - s_intra).abs() / total
    } else {
        T::zero()
    };
    Ok(AffinityBias {
        s_intra,
        s_inter,
        d,
        n_intra,
        n_inter,
        n_zero_excluded: zeros,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceBinRow<T> {
    pub lo_km: T,
    pub hi_km: T,
    pub n_pairs: usize,
    pub observed_probability: T,
    pub modeled_probability: T,
}

/// Migration probability against centroid distance, observed vs. modeled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedComparison<T> {
    pub rows: Vec<DistanceBinRow<T>>,
    /// MAPE over bins with positive observed probability.
    pub mape: Option<T>,
}

/// Off-diagonal pairs binned by centroid distance on a log scale
/// (`bins_per_decade` bins per factor of ten).
pub fn distance_binned_comparison<T: Scalar>(
    observed: &FluxMatrix<T>,
    modeled: &FluxMatrix<T>,
    profiles: &[RegionProfile<T>],
    bins_per_decade: usize,
) -> Result<BinnedComparison<T>> {
    check_same_regions(observed, modeled)?;
    check_alignment(observed, profiles)?;
    if bins_per_decade == 0 {
        return Err(validation!("bins_per_decade must be positive"));
    }
    let r = centroid_distances(profiles)?;
    let pairs: Vec<(usize, usize)> = observed.values.off_diagonal().collect();
    if pairs.is_empty() {
        return Ok(BinnedComparison {
            rows: vec![],
            mape: None,
        });
    }
    let ds: Vec<f64> = pairs.iter().map(|&(i, j)| r[(i, j)].as_f64()).collect();
    let lo = ds.iter().copied().fold(f64::INFINITY, f64::min).log10();
    let hi = ds.iter().copied().fold(0.0, f64::max).log10();
    let per = bins_per_decade as f64;
    let first = (lo * per).floor() as i64;
    let last = ((hi * per).floor() as i64).max(first);
    let nb = (last - first + 1) as usize;
    let mut obs = vec![T::zero(); nb];
    let mut model = vec![T::zero(); nb];
    let mut counts = vec![0usize; nb];
    for (&(i, j), &d) in pairs.iter().zip(&ds) {
        let b = (((d.log10() * per).floor() as i64 - first) as usize).min(nb - 1);
        obs[b] += observed.get(i, j);
        model[b] += modeled.get(i, j);
        counts[b] += 1;
    }
    let tot_o: T = obs.iter().copied().sum();
    let tot_m: T = model.iter().copied().sum();
    let norm = |v: T, t: T| if t > T::zero() { v / t } else { T::zero() };
    let rows: Vec<DistanceBinRow<T>> = (0..nb)
        .map(|b| DistanceBinRow {
            lo_km: T::of(10f64.powf((first + b as i64) as f64 / per)),
            hi_km: T::of(10f64.powf((first + b as i64 + 1) as f64 / per)),
            n_pairs: counts[b],
            observed_probability: norm(obs[b], tot_o),
            modeled_probability: norm(model[b], tot_m),
        })
        .collect();
    let compared: Vec<_> = rows.iter().filter(|r| r.observed_probability > T::zero()).collect();
    let mape = (!compared.is_empty()).then(|| {
        T::of(100.0)
            * compared
                .iter()
                .map(|r| (r.observed_probability - r.modeled_probability).abs() / r.observed_probability)
                .sum::<T>()
            / T::of_count(compared.len())
    });
    Ok(BinnedComparison { rows, mape })
}
