//! Brute-force reference implementations over plain vectors. They share no
//! code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

pub type Dense = Vec<Vec<f64>>;

/// Modularity from the double sum over node pairs on `A = W + Wᵀ`.
pub fn modularity(w: &Dense, labels: &[usize]) -> f64 {
    let n = w.len();
    let a: Dense = (0..n).map(|i| (0..n).map(|j| w[i][j] + w[j][i]).collect()).collect();
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Every set partition of `0..n` as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for l in 0..=max + 1 {
            prefix.push(l);
            grow(prefix, max.max(l), n, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut prefix = vec![0];
    grow(&mut prefix, 0, n, &mut out);
    out
}

/// Exhaustive modularity maximum.
pub fn best_modularity(w: &Dense) -> f64 {
    set_partitions(w.len())
        .iter()
        .map(|p| modularity(w, p))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn dense_from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Dense {
    let mut w = vec![vec![0.0; n]; n];
    for &(i, j, x) in edges {
        w[i][j] += x;
    }
    w
}

/// `(a, b, c, d)` by visiting every unordered pair.
pub fn pair_counts(l1: &[usize], l2: &[usize]) -> (u64, u64, u64, u64) {
    let (mut a, mut b, mut c, mut d) = (0, 0, 0, 0);
    for i in 0..l1.len() {
        for j in i + 1..l1.len() {
            match (l1[i] == l1[j], l2[i] == l2[j]) {
                (true, true) => a += 1,
                (true, false) => b += 1,
                (false, true) => c += 1,
                (false, false) => d += 1,
            }
        }
    }
    (a, b, c, d)
}

/// Adjusted Rand in its pair-count form.
pub fn adjusted_rand(l1: &[usize], l2: &[usize]) -> f64 {
    let (a, b, c, d) = pair_counts(l1, l2);
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0.0 {
        1.0
    } else {
        2.0 * (a * d - b * c) / den
    }
}

fn clusters(l: &[usize]) -> BTreeMap<usize, BTreeSet<usize>> {
    let mut out: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (i, &x) in l.iter().enumerate() {
        out.entry(x).or_default().insert(i);
    }
    out
}

/// Greedy one-to-one matching by descending overlap. Ties go to the smaller
/// label name, compared as the strings `label_name` produces.
pub fn meila_heckerman(l1: &[usize], l2: &[usize], label_name: impl Fn(usize) -> String) -> f64 {
    let (c1, c2) = (clusters(l1), clusters(l2));
    let mut cand = Vec::new();
    for (x, sx) in &c1 {
        for (y, sy) in &c2 {
            let v = sx.intersection(sy).count();
            if v > 0 {
                cand.push((v, label_name(*x), label_name(*y)));
            }
        }
    }
    cand.sort_by(|p, q| q.0.cmp(&p.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let (mut u1, mut u2) = (BTreeSet::new(), BTreeSet::new());
    let mut matched = 0;
    for (v, x, y) in cand {
        if !u1.contains(&x) && !u2.contains(&y) {
            u1.insert(x);
            u2.insert(y);
            matched += v;
        }
    }
    matched as f64 / l1.len() as f64
}

pub fn larsen(l1: &[usize], l2: &[usize]) -> f64 {
    let (c1, c2) = (clusters(l1), clusters(l2));
    let sum: f64 = c1
        .values()
        .map(|sx| {
            c2.values()
                .map(|sy| 2.0 * sx.intersection(sy).count() as f64 / (sx.len() + sy.len()) as f64)
                .fold(0.0, f64::max)
        })
        .sum();
    sum / c1.len() as f64
}

pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let r = 6371.0;
    let (p1, p2) = (a.1.to_radians(), b.1.to_radians());
    let dp = p2 - p1;
    let dl = (b.0 - a.0).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * r * h.sqrt().asin()
}

/// Radiation prediction with `s_ij` summed region by region: every `k ∉ {i, j}`
/// with `r_ik <= r_ij` counts.
pub fn radiation(pop: &[f64], lonlat: &[(f64, f64)], outflow: &[f64]) -> Dense {
    let n = pop.len();
    let r = |i: usize, j: usize| haversine_km(lonlat[i], lonlat[j]);
    let mut t = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let s: f64 = (0..n)
                .filter(|&k| k != i && k != j && r(i, k) <= r(i, j))
                .map(|k| pop[k])
                .sum();
            let den = (pop[i] + s) * (pop[i] + pop[j] + s);
            t[i][j] = if den > 0.0 { outflow[i] * pop[i] * pop[j] / den } else { 0.0 };
        }
    }
    t
}

/// MAPE over off-diagonal entries with positive observation.
pub fn mape(obs: &Dense, model: &Dense) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for i in 0..obs.len() {
        for j in 0..obs.len() {
            if i != j && obs[i][j] > 0.0 {
                sum += ((model[i][j] - obs[i][j]) / obs[i][j]).abs();
                n += 1;
            }
        }
    }
    100.0 * sum / n as f64
}

/// `s_i` straight from the flow definitions; `None` for nodes without flow to
/// other nodes.
pub fn border_strength(w: &Dense, labels: &[usize]) -> Vec<Option<f64>> {
    let n = w.len();
    let total: f64 = w.iter().flatten().sum();
    let m = |i: usize, j: usize| w[i][j] / total;
    let s = |i: usize| (0..n).map(|j| m(i, j)).sum::<f64>();
    let t = |j: usize| (0..n).map(|i| m(i, j)).sum::<f64>();
    let e = |i: usize, j: usize| m(i, j) - s(i) * t(j);
    let regions: BTreeSet<usize> = labels.iter().copied().collect();
    (0..n)
        .map(|i| {
            let den = s(i) + t(i) - 2.0 * m(i, i);
            if den <= 0.0 {
                return None;
            }
            let c = |p: usize| -> f64 {
                (0..n)
                    .filter(|&j| j != i && labels[j] == p)
                    .map(|j| e(i, j) + e(j, i))
                    .sum::<f64>()
                    / den
            };
            let foreign = regions
                .iter()
                .filter(|&&p| p != labels[i])
                .map(|&p| c(p))
                .fold(f64::NEG_INFINITY, f64::max);
            Some(c(labels[i]) - foreign)
        })
        .collect()
}
