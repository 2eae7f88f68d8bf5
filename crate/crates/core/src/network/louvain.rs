//! Two-phase Louvain modularity optimisation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{modularity_of, CommunityAssignment, MobilityNetwork};
use crate::error::{validation, Error, Result};
use crate::ingest::PartitionScheme;
use crate::matrix::SquareMatrix;
use crate::scalar::Scalar;

/// Recorded next to every detection result.
pub const LOUVAIN_VERSION: &str = "louvain-2phase/1";

const MIN_GAIN: f64 = 1e-12;

/// Plug-in point for community detection algorithms.
pub trait CommunityDetector<T: Scalar> {
    fn name(&self) -> &str;
    fn detect(&self, net: &MobilityNetwork<T>) -> Result<CommunityAssignment>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Louvain {
    pub seed: u64,
}

impl<T: Scalar> CommunityDetector<T> for Louvain {
    fn name(&self) -> &str {
        LOUVAIN_VERSION
    }

    fn detect(&self, net: &MobilityNetwork<T>) -> Result<CommunityAssignment> {
        louvain(net, self.seed)
    }
}

/// Adjacency lists of a symmetric weight matrix; self-loops kept separately.
struct Graph<T> {
    adj: Vec<Vec<(usize, T)>>,
    self_loop: Vec<T>,
    degree: Vec<T>,
}

impl<T: Scalar> Graph<T> {
    fn from_symmetric(a: &SquareMatrix<T>) -> Self {
        let n = a.dim();
        let mut adj = vec![Vec::new(); n];
        let mut self_loop = vec![T::zero(); n];
        for (i, nbrs) in adj.iter_mut().enumerate() {
            for (j, &w) in a.row(i).iter().enumerate() {
                if w > T::zero() {
                    if i == j {
                        self_loop[i] = w;
                    } else {
                        nbrs.push((j, w));
                    }
                }
            }
        }
        let degree = a.row_sums();
        Self {
            adj,
            self_loop,
            degree,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapses each community into one node; internal weight becomes a
    /// self-loop.
    fn aggregate(&self, comm: &[usize], n_comm: usize) -> Self {
        let mut a = SquareMatrix::zeros(n_comm);
        for i in 0..self.len() {
            a[(comm[i], comm[i])] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                a[(comm[i], comm[j])] += w;
            }
        }
        Self::from_symmetric(&a)
    }
}

/// Local-moving phase. Returns whether any node moved.
fn move_nodes<T: Scalar>(g: &Graph<T>, comm: &mut [usize], order: &[usize], two_m: T) -> bool {
    let n = g.len();
    let m = two_m / T::of(2.0);
    let min_gain = T::of(MIN_GAIN);
    let mut tot = vec![T::zero(); n];
    for i in 0..n {
        tot[comm[i]] += g.degree[i];
    }
    let mut link = vec![T::zero(); n];
    let mut touched: Vec<usize> = Vec::new();
    let mut is_touched = vec![false; n];
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &i in order {
            let own = comm[i];
            let ki = g.degree[i];
            for &(j, w) in &g.adj[i] {
                let c = comm[j];
                if !is_touched[c] {
                    is_touched[c] = true;
                    touched.push(c);
                }
                link[c] += w;
            }
            tot[own] -= ki;
            let gain = |c: usize, link_c: T| (link_c - ki * tot[c] / two_m) / m;
            let stay = gain(own, link[own]);
            let mut best = own;
            let mut best_gain = stay;
            for &c in &touched {
                if c == own {
                    continue;
                }
                let gc = gain(c, link[c]);
                if gc - stay > min_gain && gc > best_gain {
                    best = c;
                    best_gain = gc;
                }
            }
            tot[best] += ki;
            if best != own {
                comm[i] = best;
                moved = true;
            }
            for &c in &touched {
                link[c] = T::zero();
                is_touched[c] = false;
            }
            touched.clear();
        }
        if !moved {
            return moved_any;
        }
        moved_any = true;
    }
}

/// Renumbers in order of first appearance; returns the count.
fn compact(comm: &mut [usize]) -> usize {
    let mut map = vec![usize::MAX; comm.len()];
    let mut next = 0;
    for c in comm.iter_mut() {
        if map[*c] == usize::MAX {
            map[*c] = next;
            next += 1;
        }
        *c = map[*c];
    }
    next
}

/// Louvain on `W + Wᵀ`. Each level sweeps nodes in a seeded shuffled order
/// and moves a node only for a modularity gain above 1e-12.
pub fn louvain<T: Scalar>(net: &MobilityNetwork<T>, seed: u64) -> Result<CommunityAssignment> {
    let a = net.symmetrized();
    let two_m = a.total();
    if !(two_m > T::zero()) {
        return Err(Error::Degenerate("louvain on a graph with no edge weight".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graph = Graph::from_symmetric(&a);
    let mut membership: Vec<usize> = (0..net.len()).collect();
    loop {
        let n = graph.len();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        if !move_nodes(&graph, &mut comm, &order, two_m) {
            break;
        }
        let n_comm = compact(&mut comm);
        for m in membership.iter_mut() {
            *m = comm[*m];
        }
        if n_comm == n {
            break;
        }
        graph = graph.aggregate(&comm, n_comm);
    }
    CommunityAssignment::from_labels(net.node_ids().to_vec(), &membership)
}

#[derive(Debug, Clone)]
pub struct SeedSweep<T> {
    pub seed: u64,
    pub assignment: CommunityAssignment,
    pub modularity: T,
}

/// Runs one Louvain per seed in parallel and keeps the highest modularity;
/// ties go to the earliest seed in `seeds`.
pub fn louvain_best_of<T: Scalar>(net: &MobilityNetwork<T>, seeds: &[u64]) -> Result<SeedSweep<T>> {
    if seeds.is_empty() {
        return Err(validation!("seed sweep needs at least one seed"));
    }
    let a = net.symmetrized();
    let runs: Vec<Result<SeedSweep<T>>> = seeds
        .par_iter()
        .map(|&seed| {
            let assignment = louvain(net, seed)?;
            let modularity = modularity_of(&a, assignment.labels(), assignment.n_communities())?;
            Ok(SeedSweep {
                seed,
                assignment,
                modularity,
            })
        })
        .collect();
    let mut best: Option<SeedSweep<T>> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.modularity > b.modularity) {
            best = Some(r);
        }
    }
    Ok(best.expect("non-empty seeds"))
}

#[derive(Debug, Clone)]
pub struct ConstrainedCommunities {
    pub assignment: CommunityAssignment,
    /// Level-1 regions whose induced subgraph carried no weight and were kept
    /// whole.
    pub trivial_regions: Vec<String>,
}

/// Louvain inside each level-1 region separately; cross-region edges are
/// ignored, so every detected community nests in one region.
pub fn constrained_subcommunities<T: Scalar>(
    net: &MobilityNetwork<T>,
    level1: &PartitionScheme,
    seed: u64,
) -> Result<ConstrainedCommunities> {
    let labels = net.labels_from(level1)?;
    let mut regions: Vec<&str> = labels.iter().map(String::as_str).collect();
    regions.sort_unstable();
    regions.dedup();
    let mut raw = vec![(0usize, 0usize); net.len()];
    let mut trivial_regions = Vec::new();
    for (r, region) in regions.iter().enumerate() {
        let nodes: Vec<usize> = (0..net.len()).filter(|&k| labels[k] == *region).collect();
        let sub = net.induced(&nodes);
        let sub_labels: Vec<usize> = if sub.weights().total() > T::zero() {
            louvain(&sub, seed)?.labels().to_vec()
        } else {
            trivial_regions.push(region.to_string());
            vec![0; nodes.len()]
        };
        for (&k, &l) in nodes.iter().zip(&sub_labels) {
            raw[k] = (r, l);
        }
    }
    Ok(ConstrainedCommunities {
        assignment: CommunityAssignment::from_labels(net.node_ids().to_vec(), &raw)?,
        trivial_regions,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::modularity;
    use super::*;

    #[test]
    fn two_triangles_recovered() {
        let net = two_triangles();
        for seed in 0..20 {
            let a = louvain(&net, seed).unwrap();
            assert_eq!(a.n_communities(), 2);
            assert_eq!(a.labels()[0], a.labels()[1]);
            assert_eq!(a.labels()[1], a.labels()[2]);
            assert_eq!(a.labels()[3], a.labels()[5]);
            assert!((modularity(&net, &a).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_graph_is_one_community() {
        let edges: Vec<_> = (0..5)
            .flat_map(|i| (i + 1..5).map(move |j| (i, j, 1.0)))
            .collect();
        let net = net_from_edges(5, &edges);
        for seed in 0..10 {
            assert_eq!(louvain(&net, seed).unwrap().n_communities(), 1);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let net = two_triangles();
        assert_eq!(louvain(&net, 4).unwrap(), louvain(&net, 4).unwrap());
    }

    #[test]
    fn detector_trait_dispatch() {
        let net = two_triangles();
        let d: &dyn CommunityDetector<f64> = &Louvain { seed: 1 };
        assert_eq!(d.detect(&net).unwrap().n_communities(), 2);
        assert_eq!(d.name(), LOUVAIN_VERSION);
    }

    #[test]
    fn constrained_with_single_region_equals_plain() {
        let net = two_triangles();
        let scheme = PartitionScheme::new_unchecked(
            "one",
            net.node_ids().iter().map(|id| (id.clone(), "R".to_string())).collect(),
        );
        for seed in 0..5 {
            let c = constrained_subcommunities(&net, &scheme, seed).unwrap();
            assert_eq!(c.assignment, louvain(&net, seed).unwrap());
        }
    }

    #[test]
    fn constrained_reports_weightless_regions() {
        let net = net_from_edges(4, &[(0, 1, 1.0)]);
        let scheme = PartitionScheme::from_pairs(
            "s",
            [("n0", "A"), ("n1", "A"), ("n2", "B"), ("n3", "B")],
        )
        .unwrap();
        let c = constrained_subcommunities(&net, &scheme, 0).unwrap();
        assert_eq!(c.trivial_regions, vec!["B".to_string()]);
        assert_eq!(c.assignment.labels()[2], c.assignment.labels()[3]);
        assert_ne!(c.assignment.labels()[0], c.assignment.labels()[2]);
    }

    #[test]
    fn best_of_seeds_prefers_earliest_on_ties() {
        let net = two_triangles();
        let s = louvain_best_of(&net, &[9, 3, 5]).unwrap();
        assert_eq!(s.seed, 9);
        assert!((s.modularity - 0.5).abs() < 1e-12);
    }
}
