mod common;

use common::oracles;
use mobility_core::ingest::PartitionScheme;
use mobility_core::network::{pair_counts, similarity_indices, similarity_indices_verbose};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn label(x: usize) -> String {
    format!("L{x:02}")
}

fn scheme(name: &str, labels: &[usize]) -> PartitionScheme {
    PartitionScheme::new_unchecked(
        name,
        labels.iter().enumerate().map(|(k, &l)| (format!("e{k:03}"), label(l))).collect(),
    )
}

fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let k = rng.random_range(1..=8);
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

fn check_against_oracle(l1: &[usize], l2: &[usize]) {
    let (p1, p2) = (scheme("p1", l1), scheme("p2", l2));
    let (a, b, c, d) = oracles::pair_counts(l1, l2);
    let pc = pair_counts(&p1, &p2).unwrap();
    assert_eq!((pc.a, pc.b, pc.c, pc.d), (a, b, c, d));
    let (af, bf, cf, df) = (a as f64, b as f64, c as f64, d as f64);
    let n = af + bf + cf + df;
    let v = similarity_indices_verbose(&p1, &p2).unwrap();
    let s = v.indices;
    assert_eq!(s.rand, (af + df) / n);
    assert_eq!(s.jaccard, af / (af + bf + cf));
    assert_eq!(s.fowlkes_mallows, af / ((af + bf) * (af + cf)).sqrt());
    assert_eq!(s.wallace, af / (af + bf));
    assert_eq!(v.wallace_reverse, af / (af + cf));
    assert_eq!(s.hubert, (af + df - bf - cf) / n);
    assert!((s.adjusted_rand - oracles::adjusted_rand(l1, l2)).abs() <= 1e-12);
    assert!((s.meila_heckerman - oracles::meila_heckerman(l1, l2, label)).abs() <= 1e-12);
    assert!((s.larsen - oracles::larsen(l1, l2)).abs() <= 1e-12);
}

#[test]
fn twenty_random_pairs_match_pair_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2013);
    let mut done = 0;
    while done < 20 {
        let (l1, l2) = (random_labels(&mut rng, 50), random_labels(&mut rng, 50));
        // the ratio forms above assume nonzero denominators
        let (a, b, c, _) = oracles::pair_counts(&l1, &l2);
        if a == 0 || b == 0 || c == 0 {
            continue;
        }
        check_against_oracle(&l1, &l2);
        done += 1;
    }
}

#[test]
fn identical_random_partitions_score_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let l = random_labels(&mut rng, 50);
        let p = scheme("p", &l);
        let s = similarity_indices(&p, &p).unwrap();
        for v in [s.rand, s.adjusted_rand, s.jaccard, s.fowlkes_mallows, s.wallace, s.hubert, s.meila_heckerman, s.larsen] {
            assert_eq!(v, 1.0);
        }
    }
}

#[test]
fn independent_partitions_have_ari_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 2000;
    let mut total = 0.0;
    for _ in 0..20 {
        let l1: Vec<usize> = (0..n).map(|_| rng.random_range(0..6)).collect();
        let l2: Vec<usize> = (0..n).map(|_| rng.random_range(0..6)).collect();
        let ari = similarity_indices(&scheme("p", &l1), &scheme("q", &l2)).unwrap().adjusted_rand;
        assert!(ari.abs() < 0.01, "{ari}");
        total += ari;
    }
    assert!((total / 20.0).abs() < 0.003);
}

#[test]
fn closer_partitions_score_higher() {
    // relabelling an increasing share of elements lowers every index
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base: Vec<usize> = (0..200).map(|i| i / 20).collect();
    let mut prev = similarity_indices(&scheme("p", &base), &scheme("q", &base)).unwrap();
    for moved in [10, 40, 120] {
        let mut l = base.clone();
        for x in l.iter_mut().take(moved) {
            *x = rng.random_range(0..10);
        }
        let s = similarity_indices(&scheme("p", &base), &scheme("q", &l)).unwrap();
        assert!(s.adjusted_rand < prev.adjusted_rand);
        assert!(s.jaccard < prev.jaccard);
        assert!(s.rand < prev.rand);
        prev = s;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pair_counts_and_ranges(l1 in proptest::collection::vec(0usize..5, 2..40), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l2: Vec<usize> = l1.iter().map(|_| rng.random_range(0..4)).collect();
        let (a, b, c, d) = oracles::pair_counts(&l1, &l2);
        let pc = pair_counts(&scheme("p", &l1), &scheme("q", &l2)).unwrap();
        prop_assert_eq!((pc.a, pc.b, pc.c, pc.d), (a, b, c, d));
        let n = l1.len() as u64;
        prop_assert_eq!(pc.n_pairs(), n * (n - 1) / 2);
        let s = similarity_indices(&scheme("p", &l1), &scheme("q", &l2)).unwrap();
        for v in [s.rand, s.jaccard, s.fowlkes_mallows, s.wallace, s.meila_heckerman, s.larsen] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((-1.0..=1.0).contains(&s.hubert));
        prop_assert!(s.adjusted_rand <= 1.0 + 1e-12);
    }

    #[test]
    fn symmetric_indices_do_not_depend_on_order(l1 in proptest::collection::vec(0usize..5, 2..40), l2 in proptest::collection::vec(0usize..5, 40)) {
        let l2 = &l2[..l1.len()];
        let s = similarity_indices(&scheme("p", &l1), &scheme("q", l2)).unwrap();
        let t = similarity_indices(&scheme("q", l2), &scheme("p", &l1)).unwrap();
        prop_assert_eq!(s.rand, t.rand);
        prop_assert_eq!(s.jaccard, t.jaccard);
        prop_assert_eq!(s.hubert, t.hubert);
        prop_assert!((s.adjusted_rand - t.adjusted_rand).abs() < 1e-12);
        prop_assert!((s.fowlkes_mallows - t.fowlkes_mallows).abs() < 1e-12);
    }
}
