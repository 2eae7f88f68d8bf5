//! Antenna-level mobility network, modularity, community detection and
//! partition similarity.

mod louvain;
mod similarity;

use std::collections::{BTreeMap, HashMap};

use crate::error::{validation, Error, Result};
use crate::ingest::{AntennaRegistry, EventLog, PartitionScheme};
use crate::matrix::SquareMatrix;
use crate::scalar::Scalar;

pub use louvain::{
    constrained_subcommunities, louvain, louvain_best_of, CommunityDetector, ConstrainedCommunities,
    Louvain, SeedSweep, LOUVAIN_VERSION,
};
pub use similarity::{
    pair_counts, similarity_indices, similarity_indices_verbose, PairCounts, SimilarityIndices,
    VerboseSimilarity,
};

pub const DEFAULT_TRANSITION_WINDOW_S: i64 = 24 * 3600;

/// Directed transition counts between antennas; `W[i][j]` counts consecutive
/// calls of one user at `i` then `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityNetwork<T> {
    node_ids: Vec<String>,
    weights: SquareMatrix<T>,
}

impl<T: Scalar> MobilityNetwork<T> {
    pub fn new(node_ids: Vec<String>, weights: SquareMatrix<T>) -> Result<Self> {
        if node_ids.len() != weights.dim() {
            return Err(validation!(
                "{} node ids for a {}x{} weight matrix",
                node_ids.len(),
                weights.dim(),
                weights.dim()
            ));
        }
        let n = node_ids.len();
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !(w >= T::zero()) || !w.is_finite() {
                    return Err(validation!("weight {i}->{j} is {w}; weights must be finite and >= 0"));
                }
            }
        }
        Ok(Self { node_ids, weights })
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn weights(&self) -> &SquareMatrix<T> {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|x| x == id)
    }

    /// Undirected weights `A = W + Wᵀ`.
    pub fn symmetrized(&self) -> SquareMatrix<T> {
        self.weights.symmetrized()
    }

    /// Subnetwork on `nodes`, in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Self {
        Self {
            node_ids: nodes.iter().map(|&k| self.node_ids[k].clone()).collect(),
            weights: SquareMatrix::from_fn(nodes.len(), |a, b| self.weights[(nodes[a], nodes[b])]),
        }
    }

    /// Per-node labels of `scheme`, failing on nodes it does not cover.
    pub fn labels_from(&self, scheme: &PartitionScheme) -> Result<Vec<String>> {
        self.node_ids
            .iter()
            .map(|id| {
                scheme
                    .label_of(id)
                    .map(str::to_owned)
                    .ok_or_else(|| validation!("partition {} has no label for node {id}", scheme.name()))
            })
            .collect()
    }
}

/// Integer transition tally: every consecutive pair of one user with
/// `0 < dt <= window_s`, keyed by registry indices.
pub fn transition_tally(log: &EventLog, window_s: i64) -> BTreeMap<(usize, usize), u64> {
    let mut tally = BTreeMap::new();
    for traj in &log.trajectories {
        for (a, b) in traj.pairs() {
            let dt = b.timestamp - a.timestamp;
            if dt > 0 && dt <= window_s {
                *tally.entry((a.antenna, b.antenna)).or_insert(0) += 1;
            }
        }
    }
    tally
}

pub fn build_mobility_network<T: Scalar>(
    log: &EventLog,
    reg: &AntennaRegistry,
    window_s: i64,
) -> MobilityNetwork<T> {
    let mut w = SquareMatrix::zeros(reg.len());
    for ((i, j), c) in transition_tally(log, window_s) {
        w[(i, j)] = T::of(c as f64);
    }
    MobilityNetwork {
        node_ids: reg.ids().map(str::to_owned).collect(),
        weights: w,
    }
}

/// Community label per node, contiguous from 0 in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityAssignment {
    node_ids: Vec<String>,
    labels: Vec<usize>,
    n_communities: usize,
}

impl CommunityAssignment {
    /// Relabels arbitrary keys contiguously by first appearance.
    pub fn from_labels<K: Eq + std::hash::Hash>(node_ids: Vec<String>, raw: &[K]) -> Result<Self> {
        if node_ids.len() != raw.len() {
            return Err(validation!("{} labels for {} nodes", raw.len(), node_ids.len()));
        }
        let mut seen = HashMap::new();
        let labels = raw
            .iter()
            .map(|k| {
                let next = seen.len();
                *seen.entry(k).or_insert(next)
            })
            .collect();
        Ok(Self {
            node_ids,
            labels,
            n_communities: seen.len(),
        })
    }

    /// Looks up each node's label in `scheme`.
    pub fn from_scheme<T: Scalar>(net: &MobilityNetwork<T>, scheme: &PartitionScheme) -> Result<Self> {
        let raw = net.labels_from(scheme)?;
        Self::from_labels(net.node_ids.clone(), &raw)
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn label_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|x| x == id).map(|k| self.labels[k])
    }

    pub fn to_scheme(&self, name: &str) -> PartitionScheme {
        PartitionScheme::new_unchecked(
            name,
            self.node_ids
                .iter()
                .zip(&self.labels)
                .map(|(id, l)| (id.clone(), l.to_string()))
                .collect(),
        )
    }

    /// `antenna_id,community_label` rows in node order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("antenna_id,community_label\n");
        for (id, l) in self.node_ids.iter().zip(&self.labels) {
            out.push_str(&format!("{id},{l}\n"));
        }
        out
    }
}

/// Newman modularity on `A = W + Wᵀ`, diagonal included.
pub fn modularity<T: Scalar>(net: &MobilityNetwork<T>, asg: &CommunityAssignment) -> Result<T> {
    if asg.node_ids != net.node_ids {
        return Err(validation!("community assignment does not cover the network's nodes"));
    }
    modularity_of(&net.symmetrized(), &asg.labels, asg.n_communities)
}

/// Modularity of `labels` (each `< n_comm`) on a symmetric weight matrix.
pub(crate) fn modularity_of<T: Scalar>(a: &SquareMatrix<T>, labels: &[usize], n_comm: usize) -> Result<T> {
    let two_m = a.total();
    if !(two_m > T::zero()) {
        return Err(Error::Degenerate("modularity of a graph with no edge weight".into()));
    }
    let k = a.row_sums();
    let mut inside = vec![T::zero(); n_comm];
    let mut degree = vec![T::zero(); n_comm];
    for i in 0..a.dim() {
        degree[labels[i]] += k[i];
        for (j, &w) in a.row(i).iter().enumerate() {
            if labels[j] == labels[i] {
                inside[labels[i]] += w;
            }
        }
    }
    Ok(inside
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| e / two_m - (d / two_m) * (d / two_m))
        .sum())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn net_from_edges(n: usize, edges: &[(usize, usize, f64)]) -> MobilityNetwork<f64> {
        let mut w = SquareMatrix::zeros(n);
        for &(i, j, x) in edges {
            w[(i, j)] += x;
        }
        MobilityNetwork::new((0..n).map(|k| format!("n{k}")).collect(), w).unwrap()
    }

    pub fn two_triangles() -> MobilityNetwork<f64> {
        net_from_edges(
            6,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (3, 4, 1.0), (4, 5, 1.0), (5, 3, 1.0)],
        )
    }
}
