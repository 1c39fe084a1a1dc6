//! Mann-Whitney U against closed-form cases and an exhaustive
//! pair-counting permutation oracle.

use lazyboe::stats::{
    marker_for, mann_whitney_u, mann_whitney_u_normal_approx, mean, median,
    EXACT_ENUMERATION_MAX,
};
use rand::Rng;

/// U of sample `a` versus `b` by direct pair counting: one per a > b pair,
/// half per tie. Independent of the rank-sum formula in the implementation.
fn u_by_pairs(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for &x in a {
        for &y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Exact two-sided p by enumerating every split of the combined sample.
fn p_by_enumeration(a: &[f64], b: &[f64]) -> f64 {
    let combined: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let n = combined.len();
    let n1 = a.len();
    let mu = (n1 * (n - n1)) as f64 / 2.0;
    let dev = (u_by_pairs(a, b) - mu).abs() - 1e-9;
    let mut extreme = 0u64;
    let mut total = 0u64;
    // Iterate subsets of size n1 via bitmasks; n <= 12 here.
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let mut ga = Vec::with_capacity(n1);
        let mut gb = Vec::with_capacity(n - n1);
        for (i, &v) in combined.iter().enumerate() {
            if mask & (1 << i) != 0 {
                ga.push(v);
            } else {
                gb.push(v);
            }
        }
        total += 1;
        if (u_by_pairs(&ga, &gb) - mu).abs() >= dev {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

#[test]
fn disjoint_three_vs_three() {
    let a = [1.0, 2.0, 3.0];
    let b = [4.0, 5.0, 6.0];
    let r = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(r.u_statistic, 0.0);
    // Only the two fully separated splits of 20 are as extreme: p = 0.1.
    assert!((r.p_value - 0.1).abs() < 1e-12);
    assert_eq!(r.marker, "ns");
}

#[test]
fn identical_samples_are_not_significant() {
    let a = [2.0, 2.0, 2.0, 2.0];
    let b = [2.0, 2.0, 2.0, 2.0];
    let r = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(r.p_value, 1.0);
    assert_eq!(r.marker, "ns");

    let r = mann_whitney_u_normal_approx(&a, &b).unwrap();
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn exact_branch_matches_enumeration_oracle() {
    let mut rng = lazyboe::rng::stream(51);
    for trial in 0..200 {
        let n1 = rng.random_range(2..=6);
        let n2 = rng.random_range(2..=6);
        if n1 + n2 > 12 {
            continue;
        }
        // Small integer values provoke plenty of ties.
        let a: Vec<f64> = (0..n1).map(|_| rng.random_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.random_range(0..6) as f64).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(
            (r.u_statistic - u_by_pairs(&a, &b)).abs() < 1e-9,
            "trial {trial}: U mismatch for {a:?} vs {b:?}"
        );
        let expected = p_by_enumeration(&a, &b);
        assert!(
            (r.p_value - expected).abs() < 1e-9,
            "trial {trial}: p {} vs oracle {expected} for {a:?} vs {b:?}",
            r.p_value
        );
    }
}

#[test]
fn normal_approx_tracks_exact_at_the_crossover() {
    // At the largest exactly-enumerable size the approximation must be close.
    let mut rng = lazyboe::rng::stream(52);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n1 = EXACT_ENUMERATION_MAX / 2;
        let a: Vec<f64> = (0..n1).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..n1).map(|_| rng.random::<f64>()).collect();
        let exact = mann_whitney_u(&a, &b).unwrap().p_value;
        let approx = mann_whitney_u_normal_approx(&a, &b).unwrap().p_value;
        worst = worst.max((exact - approx).abs());
    }
    assert!(worst < 0.01, "worst exact-vs-approx gap {worst:.4}");
}

#[test]
fn symmetry_in_sample_order() {
    let mut rng = lazyboe::rng::stream(53);
    for _ in 0..50 {
        let a: Vec<f64> = (0..5).map(|_| rng.random_range(0..8) as f64).collect();
        let b: Vec<f64> = (0..7).map(|_| rng.random_range(0..8) as f64).collect();
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        assert!((ab.p_value - ba.p_value).abs() < 1e-9);
        // U_a + U_b = n1 * n2.
        assert!((ab.u_statistic + ba.u_statistic - (a.len() * b.len()) as f64).abs() < 1e-9);
    }
}

#[test]
fn empty_samples_are_rejected() {
    assert!(mann_whitney_u(&[], &[1.0]).is_err());
    assert!(mann_whitney_u(&[1.0], &[]).is_err());
}

#[test]
fn marker_thresholds() {
    assert_eq!(marker_for(0.5), "ns");
    assert_eq!(marker_for(0.0501), "ns");
    assert_eq!(marker_for(0.05), "*");
    assert_eq!(marker_for(0.011), "*");
    assert_eq!(marker_for(0.01), "**");
    assert_eq!(marker_for(0.001), "***");
    assert_eq!(marker_for(0.0001), "****");
    assert_eq!(marker_for(0.00001), "****");
}

#[test]
fn median_and_mean() {
    assert_eq!(median(&[]), None);
    assert_eq!(mean(&[]), None);
    assert_eq!(median(&[3.0]), Some(3.0));
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    assert_eq!(mean(&[1.0, 2.0, 6.0]), Some(3.0));
}
