//! Partition connectedness and the border-strength field, sampled along the
//! Voronoi edges that separate regions.

mod sampling;

use serde::Serialize;

use crate::error::{validation, Error, Result};
use crate::ingest::PartitionScheme;
use crate::matrix::SquareMatrix;
use crate::network::MobilityNetwork;
use crate::scalar::Scalar;

pub use sampling::{
    border_histogram, border_polylines, histograms_to_csv, sample_border_strength, BorderHistogram,
    BorderPolyline, BorderSample, BorderSampleSet, GroupSummary, SamplingOptions,
};

/// Flows scaled to unit total with their row (`S`) and column (`T`) sums.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFlows<T> {
    pub m: SquareMatrix<T>,
    pub s: Vec<T>,
    pub t: Vec<T>,
}

pub fn normalize_flows<T: Scalar>(net: &MobilityNetwork<T>) -> Result<NormalizedFlows<T>> {
    let total = net.weights().total();
    if !(total > T::zero()) {
        return Err(Error::Degenerate("normalising a network with zero total weight".into()));
    }
    let m = net.weights().map(|w| w / total);
    Ok(NormalizedFlows {
        s: m.row_sums(),
        t: m.col_sums(),
        m,
    })
}

/// `e_ij = m_ij − S_i T_j`.
pub fn edge_excess<T: Scalar>(flows: &NormalizedFlows<T>) -> SquareMatrix<T> {
    SquareMatrix::from_fn(flows.m.dim(), |i, j| flows.m[(i, j)] - flows.s[i] * flows.t[j])
}

/// `C_{i,P}` for every region index `P < n_regions`, or `None` when node `i`
/// has no flow to other nodes.
pub fn connectedness<T: Scalar>(
    i: usize,
    labels: &[usize],
    n_regions: usize,
    e: &SquareMatrix<T>,
    flows: &NormalizedFlows<T>,
) -> Option<Vec<T>> {
    let den = flows.s[i] + flows.t[i] - T::of(2.0) * flows.m[(i, i)];
    if !(den > T::zero()) {
        return None;
    }
    let mut c = vec![T::zero(); n_regions];
    for (j, &p) in labels.iter().enumerate() {
        if j != i {
            c[p] += e[(i, j)] + e[(j, i)];
        }
    }
    Some(c.into_iter().map(|v| v / den).collect())
}

/// Per-node margin `s_i = C_{i,P_i} − max_{D ≠ P_i} C_{i,D}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorderStrengthField<T> {
    pub scheme_name: String,
    pub node_ids: Vec<String>,
    pub assigned: Vec<String>,
    /// `None` for nodes without flow to other nodes.
    pub values: Vec<Option<T>>,
    pub best_foreign: Vec<Option<String>>,
    /// Numerical violations of the expected bounds, recorded rather than clamped.
    pub findings: Vec<String>,
}

impl<T: Scalar> BorderStrengthField<T> {
    pub fn value_of(&self, id: &str) -> Option<T> {
        self.node_ids.iter().position(|x| x == id).and_then(|k| self.values[k])
    }

    pub fn n_missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// `antenna_id,s_value,assigned_region,best_foreign_region`; missing
    /// values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("antenna_id,s_value,assigned_region,best_foreign_region\n");
        for k in 0..self.node_ids.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.node_ids[k],
                self.values[k].map(|v| v.to_string()).unwrap_or_default(),
                self.assigned[k],
                self.best_foreign[k].as_deref().unwrap_or("")
            ));
        }
        out
    }
}

/// Tolerance for the bound and partition-sum checks.
const CHECK_TOL: f64 = 1e-9;

pub fn strength_field<T: Scalar>(
    net: &MobilityNetwork<T>,
    scheme: &PartitionScheme,
) -> Result<BorderStrengthField<T>> {
    let assigned = net.labels_from(scheme)?;
    let mut regions: Vec<&str> = assigned.iter().map(String::as_str).collect();
    regions.sort_unstable();
    regions.dedup();
    if regions.len() < 2 {
        return Err(validation!(
            "border strength needs at least 2 regions in {}",
            scheme.name()
        ));
    }
    let labels: Vec<usize> = assigned
        .iter()
        .map(|l| regions.binary_search(&l.as_str()).expect("label present"))
        .collect();
    let flows = normalize_flows(net)?;
    let e = edge_excess(&flows);
    let tol = T::of(CHECK_TOL).max(T::epsilon() * T::of(1e3));
    let mut values = Vec::with_capacity(net.len());
    let mut best_foreign = Vec::with_capacity(net.len());
    let mut findings = Vec::new();
    for i in 0..net.len() {
        let Some(c) = connectedness(i, &labels, regions.len(), &e, &flows) else {
            values.push(None);
            best_foreign.push(None);
            continue;
        };
        let own = labels[i];
        let (foreign, c_foreign) = c
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != own)
            .fold((usize::MAX, T::neg_infinity()), |best, (p, &v)| {
                if v > best.1 {
                    (p, v)
                } else {
                    best
                }
            });
        let s = c[own] - c_foreign;
        // Σ_{j≠i} (e_ij + e_ji) = 2 S_i T_i − 2 m_ii, whatever the partition
        let den = flows.s[i] + flows.t[i] - T::of(2.0) * flows.m[(i, i)];
        let expected = T::of(2.0) * (flows.s[i] * flows.t[i] - flows.m[(i, i)]) / den;
        let total: T = c.iter().copied().sum();
        if (total - expected).abs() > tol {
            findings.push(format!(
                "node {}: connectedness sums to {total}, expected {expected}",
                net.node_ids()[i]
            ));
        }
        if s.abs() > T::one() + tol {
            findings.push(format!("node {}: s = {s} outside [-1, 1]", net.node_ids()[i]));
        }
        values.push(Some(s));
        best_foreign.push(Some(regions[foreign].to_owned()));
    }
    Ok(BorderStrengthField {
        scheme_name: scheme.name().to_owned(),
        node_ids: net.node_ids().to_vec(),
        assigned,
        values,
        best_foreign,
        findings,
    })
}
