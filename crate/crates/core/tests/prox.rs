use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tibpalm_core::prox::{self, ProxError, SparsityBudget};

fn objective(t: f64, a: f64, kappa: f64) -> f64 {
    kappa * t.abs().sqrt() + 0.5 * (t - a) * (t - a)
}

/// Grid over [-4, 4] with step 1e-4, then golden-section around the best node.
fn grid_oracle(a: f64, kappa: f64) -> f64 {
    let step = 1e-4;
    let nodes = 80_000;
    let at = |i: usize| -4.0 + i as f64 * step;
    let best = (0..=nodes).min_by(|&i, &j| objective(at(i), a, kappa).total_cmp(&objective(at(j), a, kappa))).unwrap();
    let centre = at(best);
    if centre.abs() < step / 2.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (centre - step, centre + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = hi - g * (hi - lo);
        let d = lo + g * (hi - lo);
        if objective(c, a, kappa) < objective(d, a, kappa) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let t = 0.5 * (lo + hi);
    if objective(t, a, kappa) < objective(0.0, a, kappa) {
        t
    } else {
        0.0
    }
}

#[test]
fn half_shrinkage_against_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..60 {
        let a = rng.random_range(-3.5..3.5);
        let kappa = rng.random_range(0.05..1.5);
        let out = prox::half_shrink_scalar(a, kappa);
        let o = grid_oracle(a, kappa);
        // Skip draws within a hair of the tie where both branches are optimal.
        if (a.abs() - prox::half_threshold(kappa)).abs() < 1e-6 {
            continue;
        }
        assert!((out - o).abs() < 1e-6, "a={a} kappa={kappa}: {out} vs {o}");
    }
}

#[test]
fn threshold_tie_returns_zero() {
    for kappa in [0.1, 0.5, 2.0] {
        let t = prox::half_threshold(kappa);
        assert_eq!(prox::half_shrink_scalar(t, kappa), 0.0);
        let above = prox::half_shrink_scalar(t * (1.0 + 1e-9), kappa);
        // Just above the threshold the nonzero minimizer is (2/3)|a|.
        assert!((above - 2.0 * t / 3.0).abs() < 1e-4 * t, "{above}");
    }
}

#[test]
fn vanishing_weight_is_identity() {
    let a = [1.0, -2.0, 0.3];
    let out = prox::half_shrinkage(&a, 1e-14).unwrap();
    for (x, y) in a.iter().zip(&out) {
        assert!((x - y).abs() < 1e-8);
    }
    assert_eq!(prox::half_shrinkage(&a, 0.0), Err(ProxError::BadKappa(0.0)));
    assert!(prox::half_shrinkage(&a, f64::NAN).is_err());
}

proptest! {
    #[test]
    fn never_worse_than_zero_or_input(a in -10.0f64..10.0, kappa in 1e-3f64..5.0) {
        let t = prox::half_shrink_scalar(a, kappa);
        let v = objective(t, a, kappa);
        prop_assert!(v <= objective(0.0, a, kappa) + 1e-12);
        prop_assert!(v <= objective(a, a, kappa) + 1e-12);
        prop_assert!(t.abs() <= a.abs());
    }
}

/// Exhaustive search over supports of size at most `k`.
fn enumerate_projection(v: &[f64], k: usize) -> f64 {
    let n = v.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let d: f64 = (0..n)
            .map(|i| {
                let p = if mask >> i & 1 == 1 { v[i].max(0.0) } else { 0.0 };
                (p - v[i]).powi(2)
            })
            .sum();
        best = best.min(d);
    }
    best
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

proptest! {
    #[test]
    fn sparse_projection_is_optimal(v in prop::collection::vec(-3.0f64..3.0, 1..9), frac in 0.05f64..1.0) {
        let budget = SparsityBudget::new(frac).unwrap();
        let k = budget.count(v.len());
        let p = prox::project_sparse_nonneg(&v, budget);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!(p.iter().filter(|&&x| x != 0.0).count() <= k);
        prop_assert!((dist_sq(&p, &v) - enumerate_projection(&v, k)).abs() < 1e-12);
    }

    #[test]
    fn sparse_projection_beats_feasible_samples(
        v in prop::collection::vec(-3.0f64..3.0, 12),
        w in prop::collection::vec(0.0f64..3.0, 12),
        keep in prop::collection::vec(any::<bool>(), 12),
    ) {
        let budget = SparsityBudget::new(0.25).unwrap();
        let p = prox::project_sparse_nonneg(&v, budget);
        let mut q: Vec<f64> = w.iter().zip(&keep).map(|(x, &on)| if on { *x } else { 0.0 }).collect();
        // Trim the sample down to the budget.
        let mut seen = 0;
        for x in q.iter_mut() {
            if *x != 0.0 {
                seen += 1;
                if seen > budget.count(12) {
                    *x = 0.0;
                }
            }
        }
        prop_assert!(dist_sq(&p, &v) <= dist_sq(&q, &v) + 1e-12);
    }
}

#[test]
fn sparse_projection_ties_keep_lowest_index() {
    let b = SparsityBudget::new(0.5).unwrap();
    assert_eq!(prox::project_sparse_nonneg(&[1.0, 2.0, 2.0, 2.0], b), vec![0.0, 2.0, 2.0, 0.0]);
    assert_eq!(prox::project_sparse_nonneg(&[-1.0, -2.0], b), vec![0.0, 0.0]);
}

#[test]
fn budgets_round_up() {
    assert_eq!(SparsityBudget::new(0.25).unwrap().count(60), 15);
    assert_eq!(SparsityBudget::new(0.25).unwrap().count(61), 16);
    assert_eq!(SparsityBudget::new(0.01).unwrap().count(10), 1);
    assert_eq!(SparsityBudget::new(1.5), Err(ProxError::BadFraction(1.5)));
    assert_eq!(SparsityBudget::new(0.0), Err(ProxError::BadFraction(0.0)));
}

#[test]
fn box_and_orthant() {
    assert_eq!(prox::project_box(&[0.0, 2.0, 5.0], 1.0, 3.0).unwrap(), vec![1.0, 2.0, 3.0]);
    assert_eq!(prox::project_box(&[0.0], 3.0, 1.0), Err(ProxError::BadBox { lo: 3.0, hi: 1.0 }));
    let mut v = vec![-1.0, 0.5];
    prox::project_nonneg_in_place(&mut v);
    assert_eq!(v, prox::project_nonneg(&[-1.0, 0.5]));
}
