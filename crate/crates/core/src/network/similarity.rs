//! Pair-counting and set-matching similarity between two partitions.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{validation, Result};
use crate::ingest::PartitionScheme;

/// Unordered element pairs classified by co-membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairCounts {
    /// Together in both.
    pub a: u64,
    /// Together in the first only.
    pub b: u64,
    /// Together in the second only.
    pub c: u64,
    /// Apart in both.
    pub d: u64,
}

impl PairCounts {
    pub fn n_pairs(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Contingency table: `(label1, label2) -> overlap`, plus marginals.
struct Contingency<'a> {
    n: u64,
    cells: BTreeMap<(&'a str, &'a str), u64>,
    rows: BTreeMap<&'a str, u64>,
    cols: BTreeMap<&'a str, u64>,
}

impl<'a> Contingency<'a> {
    fn new(p1: &'a PartitionScheme, p2: &'a PartitionScheme) -> Result<Self> {
        if p1.len() != p2.len() || p1.assignment().keys().ne(p2.assignment().keys()) {
            return Err(validation!(
                "partitions {} and {} cover different elements",
                p1.name(),
                p2.name()
            ));
        }
        let mut cells = BTreeMap::new();
        let mut rows = BTreeMap::new();
        let mut cols = BTreeMap::new();
        for ((_, l1), l2) in p1.assignment().iter().zip(p2.assignment().values()) {
            *cells.entry((l1.as_str(), l2.as_str())).or_insert(0) += 1;
            *rows.entry(l1.as_str()).or_insert(0) += 1;
            *cols.entry(l2.as_str()).or_insert(0) += 1;
        }
        Ok(Self {
            n: p1.len() as u64,
            cells,
            rows,
            cols,
        })
    }

    fn pair_counts(&self) -> PairCounts {
        let a: u64 = self.cells.values().map(|&v| choose2(v)).sum();
        let same1: u64 = self.rows.values().map(|&v| choose2(v)).sum();
        let same2: u64 = self.cols.values().map(|&v| choose2(v)).sum();
        let total = choose2(self.n);
        PairCounts {
            a,
            b: same1 - a,
            c: same2 - a,
            d: total + a - same1 - same2,
        }
    }
}

pub fn pair_counts(p1: &PartitionScheme, p2: &PartitionScheme) -> Result<PairCounts> {
    Ok(Contingency::new(p1, p2)?.pair_counts())
}

/// The eight comparison indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityIndices {
    pub rand: f64,
    pub adjusted_rand: f64,
    pub jaccard: f64,
    pub fowlkes_mallows: f64,
    /// `a / (a + b)`: the first partition is the reference.
    pub wallace: f64,
    pub hubert: f64,
    /// Greedy one-to-one matching by descending overlap.
    pub meila_heckerman: f64,
    pub larsen: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerboseSimilarity {
    #[serde(flatten)]
    pub indices: SimilarityIndices,
    /// `a / (a + c)`: the second partition as reference.
    pub wallace_reverse: f64,
    pub pair_counts: PairCounts,
}

/// `num / den`, with the 0/0 case scored 1 when the partitions agree on every
/// pair and 0 otherwise.
fn ratio(num: f64, den: f64, agree: bool) -> f64 {
    if den == 0.0 {
        if agree {
            1.0
        } else {
            0.0
        }
    } else {
        num / den
    }
}

pub fn similarity_indices(p1: &PartitionScheme, p2: &PartitionScheme) -> Result<SimilarityIndices> {
    Ok(similarity_indices_verbose(p1, p2)?.indices)
}

pub fn similarity_indices_verbose(p1: &PartitionScheme, p2: &PartitionScheme) -> Result<VerboseSimilarity> {
    let ct = Contingency::new(p1, p2)?;
    let pc = ct.pair_counts();
    let agree = pc.b == 0 && pc.c == 0;
    let (a, b, c, d) = (pc.a as f64, pc.b as f64, pc.c as f64, pc.d as f64);
    let n_pairs = pc.n_pairs() as f64;

    let sum_rows = (pc.a + pc.b) as f64;
    let sum_cols = (pc.a + pc.c) as f64;
    let expected = if n_pairs > 0.0 { sum_rows * sum_cols / n_pairs } else { 0.0 };
    let adjusted_rand = ratio(a - expected, 0.5 * (sum_rows + sum_cols) - expected, agree);

    let n = ct.n as f64;
    let mut overlaps: Vec<(u64, &str, &str)> = ct.cells.iter().map(|(&(x, y), &v)| (v, x, y)).collect();
    overlaps.sort_by(|p, q| q.0.cmp(&p.0).then(p.1.cmp(q.1)).then(p.2.cmp(q.2)));
    let mut used1 = BTreeMap::new();
    let mut used2 = BTreeMap::new();
    let mut matched = 0u64;
    for (v, x, y) in overlaps {
        if !used1.contains_key(x) && !used2.contains_key(y) {
            used1.insert(x, ());
            used2.insert(y, ());
            matched += v;
        }
    }
    let meila_heckerman = ratio(matched as f64, n, agree);

    let larsen_sum: f64 = ct
        .rows
        .iter()
        .map(|(&x, &nx)| {
            ct.cells
                .range((x, "")..)
                .take_while(|((l1, _), _)| *l1 == x)
                .map(|((_, y), &v)| 2.0 * v as f64 / (nx + ct.cols[y]) as f64)
                .fold(0.0, f64::max)
        })
        .sum();
    let larsen = ratio(larsen_sum, ct.rows.len() as f64, agree);

    Ok(VerboseSimilarity {
        indices: SimilarityIndices {
            rand: ratio(a + d, n_pairs, agree),
            adjusted_rand,
            jaccard: ratio(a, a + b + c, agree),
            fowlkes_mallows: ratio(a, ((a + b) * (a + c)).sqrt(), agree),
            wallace: ratio(a, a + b, agree),
            hubert: ratio(a + d - b - c, n_pairs, agree),
            meila_heckerman,
            larsen,
        },
        wallace_reverse: ratio(a, a + c, agree),
        pair_counts: pc,
    })
}
