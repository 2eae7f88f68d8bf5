//! Region-level origin-destination flux, gravity and radiation predictions,
//! and their evaluation against observed flux.

mod evaluation;
mod gravity;
mod lstsq;
mod radiation;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{validation, Result};
use crate::ingest::{haversine, AntennaRegistry, LonLat, PartitionScheme};
use crate::matrix::SquareMatrix;
use crate::network::MobilityNetwork;
use crate::scalar::Scalar;

pub use evaluation::{
    affinity_bias, distance_binned_comparison, level1_of_regions, mape, mape_over,
    normalized_mapes, split_intra_inter, AffinityBias, BinnedComparison, DistanceBinRow, MapeReport,
};
pub use gravity::{gravity_fit, gravity_predict, GravityFit, GravityParams};
pub use lstsq::least_squares;
pub use radiation::{
    intervening_population, observed_outflows, radiation_from_observed, radiation_predict,
};

/// A region's aggregate population and population-weighted centroid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionProfile<T> {
    pub label: String,
    pub population: T,
    pub centroid: LonLat,
    pub members: Vec<String>,
}

/// Profiles for every label of `scheme`, in label order. Centroids fall back
/// to the plain mean of member positions when the region has no population.
pub fn region_profiles<T: Scalar>(
    reg: &AntennaRegistry,
    scheme: &PartitionScheme,
) -> Result<Vec<RegionProfile<T>>> {
    let labels = scheme.labels_for(reg)?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (k, l) in labels.iter().enumerate() {
        groups.entry(l.as_str()).or_default().push(k);
    }
    Ok(groups
        .into_iter()
        .map(|(label, ks)| {
            let pop: f64 = ks.iter().map(|&k| reg.site(k).population).sum();
            let weight = |k: usize| if pop > 0.0 { reg.site(k).population } else { 1.0 };
            let total_w: f64 = ks.iter().map(|&k| weight(k)).sum();
            let lon = ks.iter().map(|&k| weight(k) * reg.site(k).position.lon).sum::<f64>() / total_w;
            let lat = ks.iter().map(|&k| weight(k) * reg.site(k).position.lat).sum::<f64>() / total_w;
            RegionProfile {
                label: label.to_owned(),
                population: T::of(pop),
                centroid: LonLat { lon, lat },
                members: ks.iter().map(|&k| reg.site(k).id.clone()).collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxKind {
    Observed,
    Modeled,
}

impl FluxKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FluxKind::Observed => "observed",
            FluxKind::Modeled => "modeled",
        }
    }
}

/// Migrations between regions over the study window.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxMatrix<T> {
    pub regions: Vec<String>,
    pub values: SquareMatrix<T>,
    pub kind: FluxKind,
}

impl<T: Scalar> FluxMatrix<T> {
    pub fn new(regions: Vec<String>, values: SquareMatrix<T>, kind: FluxKind) -> Result<Self> {
        if regions.len() != values.dim() {
            return Err(validation!("{} regions for a {}-dim flux matrix", regions.len(), values.dim()));
        }
        let n = regions.len();
        if (0..n).any(|i| (0..n).any(|j| !(values[(i, j)] >= T::zero()))) {
            return Err(validation!("flux values must be >= 0"));
        }
        Ok(Self { regions, values, kind })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[(i, j)]
    }

    /// `origin,destination,value,kind` rows for all ordered pairs.
    pub fn to_csv_rows(&self, out: &mut String) {
        for i in 0..self.len() {
            for j in 0..self.len() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    self.regions[i],
                    self.regions[j],
                    self.values[(i, j)],
                    self.kind.as_str()
                ));
            }
        }
    }
}

pub const FLUX_CSV_HEADER: &str = "origin,destination,value,kind\n";

pub fn flux_to_csv<T: Scalar>(matrices: &[&FluxMatrix<T>]) -> String {
    let mut out = String::from(FLUX_CSV_HEADER);
    for m in matrices {
        m.to_csv_rows(&mut out);
    }
    out
}

/// `T[r][s] = Σ W[i][j]` over antennas `i ∈ r`, `j ∈ s`; regions in label order.
pub fn aggregate_flux<T: Scalar>(net: &MobilityNetwork<T>, scheme: &PartitionScheme) -> Result<FluxMatrix<T>> {
    let labels = net.labels_from(scheme)?;
    let mut regions: Vec<String> = labels.clone();
    regions.sort();
    regions.dedup();
    let idx: Vec<usize> = labels
        .iter()
        .map(|l| regions.binary_search(l).expect("label present"))
        .collect();
    let w = net.weights();
    let mut t = SquareMatrix::zeros(regions.len());
    for i in 0..net.len() {
        for j in 0..net.len() {
            t[(idx[i], idx[j])] += w[(i, j)];
        }
    }
    FluxMatrix::new(regions, t, FluxKind::Observed)
}

/// Pairwise centroid distances in km; rejects coincident centroids.
pub(crate) fn centroid_distances<T: Scalar>(profiles: &[RegionProfile<T>]) -> Result<SquareMatrix<T>> {
    let n = profiles.len();
    let mut r = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let d = haversine(profiles[i].centroid, profiles[j].centroid);
            if !(d > 0.0) {
                return Err(validation!(
                    "regions {} and {} have coincident centroids",
                    profiles[i].label,
                    profiles[j].label
                ));
            }
            r[(i, j)] = T::of(d);
            r[(j, i)] = T::of(d);
        }
    }
    Ok(r)
}

/// Checks that `profiles` line up with the flux matrix's regions.
pub(crate) fn check_alignment<T: Scalar>(flux: &FluxMatrix<T>, profiles: &[RegionProfile<T>]) -> Result<()> {
    if flux.regions.len() != profiles.len()
        || flux.regions.iter().zip(profiles).any(|(r, p)| *r != p.label)
    {
        return Err(validation!("flux regions and region profiles differ"));
    }
    Ok(())
}
