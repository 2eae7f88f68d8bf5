//! Per-region jump-law fits.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::powerlaw::{fit_truncated_power_law_with, FitOptions, PowerLawFit};
use crate::error::{Error, Result};
use crate::ingest::{AntennaRegistry, PartitionScheme};
use crate::trajectories::Displacement;

/// Which end of a displacement decides its region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionAttribution {
    #[default]
    Origin,
    Destination,
    /// Each displacement is counted once in the origin region and once in the
    /// destination region; a trip inside one region counts twice there.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRegion {
    pub region: String,
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionFits {
    pub fits: BTreeMap<String, PowerLawFit>,
    pub skipped: Vec<SkippedRegion>,
    /// Population standard deviation of the per-region β; `None` with fewer
    /// than two fits.
    pub beta_std: Option<f64>,
}

/// One row of the fit export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub region: String,
    pub delta_r0_km: f64,
    pub beta: f64,
    pub kappa_km: f64,
    pub log_likelihood: f64,
    pub n: usize,
}

impl FitRecord {
    pub fn new(region: impl Into<String>, fit: &PowerLawFit) -> Self {
        Self {
            region: region.into(),
            delta_r0_km: fit.delta_r0,
            beta: fit.beta,
            kappa_km: fit.kappa,
            log_likelihood: fit.log_likelihood,
            n: fit.n_samples,
        }
    }
}

impl RegionFits {
    pub fn records(&self) -> Vec<FitRecord> {
        self.fits.iter().map(|(r, f)| FitRecord::new(r, f)).collect()
    }
}

pub fn per_region_fits(
    displacements: &[Displacement],
    reg: &AntennaRegistry,
    scheme: &PartitionScheme,
    attribution: RegionAttribution,
    opts: &FitOptions,
) -> Result<RegionFits> {
    let labels = scheme.labels_for(reg)?;
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for l in &labels {
        groups.entry(l.as_str()).or_default();
    }
    for d in displacements {
        let ends: &[usize] = match attribution {
            RegionAttribution::Origin => &[d.origin],
            RegionAttribution::Destination => &[d.destination],
            RegionAttribution::Both => &[d.origin, d.destination],
        };
        for &k in ends {
            groups.get_mut(labels[k].as_str()).unwrap().push(d.distance_km);
        }
    }

    let outcomes: Vec<(String, usize, Result<PowerLawFit>)> = groups
        .into_par_iter()
        .map(|(region, xs)| {
            let n_pos = xs.iter().filter(|&&x| x > 0.0).count();
            let outcome = if n_pos < opts.min_samples {
                Err(Error::Validation(format!(
                    "{n_pos} positive displacements, need {}",
                    opts.min_samples
                )))
            } else {
                fit_truncated_power_law_with(&xs, opts)
            };
            (region.to_string(), xs.len(), outcome)
        })
        .collect();

    let mut fits = BTreeMap::new();
    let mut skipped = Vec::new();
    for (region, n, outcome) in outcomes {
        match outcome {
            Ok(fit) => {
                fits.insert(region, fit);
            }
            Err(Error::Validation(reason)) => skipped.push(SkippedRegion { region, n, reason }),
            Err(e @ Error::NonConvergence { .. }) => skipped.push(SkippedRegion {
                region,
                n,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let beta_std = (fits.len() >= 2).then(|| {
        let n = fits.len() as f64;
        let mean = fits.values().map(|f| f.beta).sum::<f64>() / n;
        (fits.values().map(|f| (f.beta - mean).powi(2)).sum::<f64>() / n).sqrt()
    });
    Ok(RegionFits {
        fits,
        skipped,
        beta_std,
    })
}
