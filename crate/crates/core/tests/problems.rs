use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tibpalm_core::bregman::{self, BregmanGeometry, GeometryKind, OperatingBox};
use tibpalm_core::engine::*;
use tibpalm_core::linalg::{self, Matrix, Vector};
use tibpalm_core::problems::*;
use tibpalm_core::prox::{self, SparsityBudget};

fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vector {
    let h = 1e-5;
    let mut z = x.to_vec();
    (0..x.len())
        .map(|i| {
            z[i] = x[i] + h;
            let up = f(&z);
            z[i] = x[i] - h;
            let down = f(&z);
            z[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    linalg::dist(a, b) / linalg::norm(b).max(1e-12)
}

// ---------------------------------------------------------------- nmf

fn nmf_small(budget: f64) -> SparseNmf {
    SparseNmf::synthetic(7, 5, 3, SparsityBudget::new(budget).unwrap(), 0.5, 31).unwrap()
}

#[test]
fn nmf_gradients_match_differences() {
    let p = nmf_small(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let x: Vector = (0..p.x_dim()).map(|_| rng.random::<f64>()).collect();
        let y: Vector = (0..p.y_dim()).map(|_| rng.random::<f64>()).collect();
        assert!(rel(&p.grad_x_coupling(&x, &y), &fd_grad(&|v| p.coupling(v, &y), &x)) < 1e-5);
        assert!(rel(&p.grad_y_coupling(&x, &y), &fd_grad(&|v| p.coupling(&x, v), &y)) < 1e-5);
    }
}

#[test]
fn nmf_stepsizes_match_eigensolver() {
    let p = nmf_small(1.0);
    let (x, y) = p.random_start(2);
    let (xm, ym) = (p.x_matrix(&x), p.y_matrix(&y));
    let (mu1, mu2) = nmf_stepsizes(&p, &xm, &ym);
    let top = |m: &Matrix, left: bool| {
        let a = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
        let g = if left { &a * a.transpose() } else { a.transpose() * &a };
        g.symmetric_eigen().eigenvalues.max()
    };
    let e1 = 1.01 * 0.5 * top(&ym, true);
    let e2 = 1.01 * 0.5 * top(&xm, false);
    assert!((mu1 - e1).abs() <= 0.01 * e1, "{mu1} vs {e1}");
    assert!((mu2 - e2).abs() <= 0.01 * e2, "{mu2} vs {e2}");
}

#[test]
fn nmf_zero_step_projects_current_point() {
    let p = nmf_small(0.3);
    let (x, y) = p.random_start(3);
    let g = BregmanGeometry::Euclidean { mu: 2.0 };
    let zero = vec![0.0; x.len()];
    let out = p.solve_x(&BlockRequest { anchor: &x, linear: &zero, geometry: &g, other: &y }).unwrap();
    assert_eq!(out.value, x);
    let zero = vec![0.0; y.len()];
    let out = p.solve_y(&BlockRequest { anchor: &y, linear: &zero, geometry: &g, other: &x }).unwrap();
    assert_eq!(out.value, y);
}

#[test]
fn nmf_feasible_for_200_iterations() {
    let p = SparseNmf::synthetic(30, 20, 5, SparsityBudget::new(0.25).unwrap(), 0.5, 4).unwrap();
    let g = Geometries::new(BregmanGeometry::Euclidean { mu: 1.0 }, BregmanGeometry::Euclidean { mu: 1.0 });
    let cap = p.column_budget();
    let (x0, y0) = p.random_start(4);
    for (v, s) in [
        (Variant::Tibpalm, InertialSchedule::symmetric(0.2, 0.3, 0.0)),
        (Variant::Gipalm, InertialSchedule::symmetric(0.5, 0.0, 0.0)),
        (Variant::Tibpalm, "(k-1)/(k+2)".parse::<InertialSequence>().map(|e| InertialSchedule { alpha1: e, alpha2: e, beta1: e, beta2: e, rho: 0.0 }).unwrap()),
    ] {
        let opts = RunOptions::new(v, s, StoppingRule::new(0.0, 200)).with_override(true);
        let mut steps = 0;
        let t = run_with_observer(&p, &g, &opts, x0.clone(), y0.clone(), |st, _| {
            assert!(p.max_column_nnz(&st.x_k) <= cap);
            assert!(st.x_k.iter().chain(&st.y_k).all(|&v| v >= 0.0));
            steps += 1;
        })
        .unwrap();
        assert_eq!(steps, 201);
        assert!(t.summary.theory_unsupported);
        assert!(t.records.last().unwrap().objective < t.records[0].objective);
    }
}

// ---------------------------------------------------------------- qfp

#[test]
fn qfp_problem1_value_and_gradient() {
    let q = Qfp::problem1(QfpParams::default()).unwrap();
    let ones = vec![1.0; 5];
    // xᵀMx = sum of entries of M = 35, aᵀx = 1, c = −2, bᵀx + d = 21.
    assert!((q.value(&ones).unwrap() - 34.0 / 21.0).abs() < 1e-14);
    let g = q.gradient(&ones).unwrap();
    assert!(rel(&g, &fd_grad(&|v| q.value(v).unwrap(), &ones)) < 1e-5);
    assert_eq!(q.min_denominator_on_box(), 19.0);
}

#[test]
fn qfp_zero_numerator() {
    let params = QfpParams { c: 0.0, d: 1.0, ..Default::default() };
    let q = Qfp::new(Matrix::zeros(2, 2), vec![0.0; 2], vec![0.1, 0.1], params).unwrap();
    assert_eq!(q.value(&[2.0, 2.0]).unwrap(), 0.0);
    assert_eq!(q.gradient(&[2.0, 2.0]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn qfp_rejects_infeasible_box() {
    let params = QfpParams { d: 1.0, ..Default::default() };
    assert!(Qfp::new(Matrix::identity(1), vec![0.0], vec![-1.0], params).is_err());
}

#[test]
fn qfp_random_instances_are_feasible() {
    for seed in 0..5 {
        let q = Qfp::random(20, seed, QfpParams::default()).unwrap();
        assert!(q.min_denominator_on_box() > 0.0);
        let x = q.random_start(seed);
        assert!(q.in_box(&x));
        let g = q.gradient(&x).unwrap();
        assert!(rel(&g, &fd_grad(&|v| q.value(v).unwrap(), &x)) < 1e-5);
    }
}

#[test]
fn qfp_x_block_with_zero_f_is_one_step() {
    let params = QfpParams { c: 0.0, d: 1.0, ..Default::default() };
    let q = Qfp::new(Matrix::zeros(2, 2), vec![0.0; 2], vec![0.0; 2], params).unwrap();
    let g = BregmanGeometry::Euclidean { mu: 4.0 };
    let anchor = [2.0, 1.5];
    let lin = [1.0, -2.0];
    let sol = q.x_block_solve(&BlockRequest { anchor: &anchor, linear: &lin, geometry: &g, other: &anchor }).unwrap();
    assert_eq!(sol.inner_iters, 1);
    assert!((sol.value[0] - 1.75).abs() < 1e-12 && (sol.value[1] - 2.0).abs() < 1e-12);
}

#[test]
fn qfp_x_block_matches_bisection() {
    // f(x) = (m x² + a x + c)/(b x + d) in one dimension.
    let params = QfpParams::default();
    let q = Qfp::new(Matrix::from_diag(&[2.0]), vec![1.0], vec![0.5], params).unwrap();
    let mu = 36.0;
    let g = BregmanGeometry::Euclidean { mu };
    for (anchor, lin) in [(2.0, 3.0), (1.2, -5.0), (2.9, 0.0)] {
        let sol = q
            .x_block_solve(&BlockRequest { anchor: &[anchor], linear: &[lin], geometry: &g, other: &[anchor] })
            .unwrap();
        let phi = |x: f64| q.gradient(&[x]).unwrap()[0] + lin + mu * (x - anchor);
        let (mut lo, mut hi) = (-1.0, 5.0);
        assert!(phi(lo) < 0.0 && phi(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // The inner residual tolerance scaled by the strong convexity modulus.
        let bound = tibpalm_core::problems::qfp::INNER_TOL * (1.0 + mu * anchor) / mu;
        assert!((sol.value[0] - 0.5 * (lo + hi)).abs() < bound, "{} vs {lo}", sol.value[0]);
    }
}

#[test]
fn qfp_x_block_residual_and_kl_positivity() {
    let q = Qfp::problem1(QfpParams::default()).unwrap();
    let bx = OperatingBox::new(1.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kind in [GeometryKind::KullbackLeibler, GeometryKind::ItakuraSaito, GeometryKind::Euclidean] {
        let g = bregman::make_by_name(kind, 36.0).unwrap().with_box(bx);
        for _ in 0..20 {
            let anchor: Vector = (0..5).map(|_| rng.random_range(1.0..3.0)).collect();
            let lin: Vector = (0..5).map(|_| rng.random_range(-10.0..10.0)).collect();
            let sol = q.x_block_solve(&BlockRequest { anchor: &anchor, linear: &lin, geometry: &g, other: &anchor }).unwrap();
            let x = &sol.value;
            assert!(sol.inner_iters <= 500);
            if kind != GeometryKind::Euclidean {
                assert!(x.iter().all(|&v| v > 0.0));
            }
            let ga = g.grad(&anchor).unwrap();
            let r: Vector = (0..5)
                .map(|i| q.gradient(x).unwrap()[i] + lin[i] + g.grad(x).unwrap()[i] - ga[i])
                .collect();
            assert!(linalg::norm(&r) <= 1e-8 * (1.0 + linalg::norm(&ga)), "{kind}: {}", linalg::norm(&r));
        }
    }
}

fn scalar_block(kind: GeometryKind, mu: f64, t: f64, anchor: f64, lin: f64) -> f64 {
    let g = bregman::make_by_name(kind, mu).unwrap();
    t * lin + g.distance(&[t], &[anchor]).unwrap()
}

/// Grid on [1, 3] plus golden-section refinement.
fn box_oracle(kind: GeometryKind, mu: f64, anchor: f64, lin: f64) -> f64 {
    let h = |t: f64| scalar_block(kind, mu, t, anchor, lin);
    let n = 20_000;
    let at = |i: usize| 1.0 + 2.0 * i as f64 / n as f64;
    let best = (0..=n).min_by(|&i, &j| h(at(i)).total_cmp(&h(at(j)))).unwrap();
    let (mut lo, mut hi) = (at(best.saturating_sub(1)), at((best + 1).min(n)));
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = hi - gr * (hi - lo);
        let d = lo + gr * (hi - lo);
        if h(c) < h(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn qfp_y_block_matches_grid() {
    let q = Qfp::problem1(QfpParams::default()).unwrap();
    let bx = OperatingBox::new(1.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in [GeometryKind::KullbackLeibler, GeometryKind::ItakuraSaito, GeometryKind::Euclidean] {
        let g = bregman::make_by_name(kind, 36.0).unwrap().with_box(bx);
        for _ in 0..10 {
            let anchor: Vector = (0..5).map(|_| rng.random_range(1.0..3.0)).collect();
            let lin: Vector = (0..5).map(|_| rng.random_range(-80.0..80.0)).collect();
            let sol = q.y_block_solve(&BlockRequest { anchor: &anchor, linear: &lin, geometry: &g, other: &anchor }).unwrap();
            assert!(q.in_box(&sol.value));
            for i in 0..5 {
                let o = box_oracle(kind, 36.0, anchor[i], lin[i]);
                assert!((sol.value[i] - o).abs() < 1e-6, "{kind}: {} vs {o}", sol.value[i]);
            }
        }
        // Zero drift keeps the anchor.
        let anchor = [1.5, 2.5, 1.0, 3.0, 2.0];
        let sol = q.y_block_solve(&BlockRequest { anchor: &anchor, linear: &[0.0; 5], geometry: &g, other: &anchor }).unwrap();
        for (a, b) in sol.value.iter().zip(&anchor) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn qfp_kl_y_block_closed_form() {
    let q = Qfp::problem1(QfpParams::default()).unwrap();
    let g = bregman::make_kl(36.0).unwrap();
    let anchor = [2.0; 5];
    let lin = [10.0, -10.0, 0.0, 100.0, -100.0];
    let sol = q.y_block_solve(&BlockRequest { anchor: &anchor, linear: &lin, geometry: &g, other: &anchor }).unwrap();
    for i in 0..5 {
        let expect = (anchor[i] * (-lin[i] / 36.0).exp()).clamp(1.0, 3.0);
        assert!((sol.value[i] - expect).abs() < 1e-12);
    }
}

#[test]
fn qfp_runs_stay_feasible() {
    let q = Qfp::problem1(QfpParams::default()).unwrap();
    for (gx, gy) in [(GeometryKind::ItakuraSaito, GeometryKind::Euclidean), (GeometryKind::KullbackLeibler, GeometryKind::ItakuraSaito)] {
        let g = q.geometries(gx, gy).unwrap();
        let rho = compute_rho(&q, &g).unwrap();
        let opts = RunOptions::new(Variant::Tibpalm, InertialSchedule::symmetric(0.2, 0.3, rho), StoppingRule::new(1e-4, 100_000))
            .with_override(true);
        let z = q.random_start(11);
        let t = run_with_observer(&q, &g, &opts, z.clone(), z, |st, _| {
            assert!(q.in_box(&st.y_k));
            assert!(q.denominator(&st.x_k) > 0.0);
        })
        .unwrap();
        assert!(t.summary.converged(), "{:?}", t.summary.termination);
        assert!(t.summary.total_inner_x >= t.summary.iterations);
    }
}

// ---------------------------------------------------------------- sigrec

fn sig(seed: u64, noisy: bool) -> SignalRecovery {
    sigrec_make(&SigrecSpec::new(12, 40, seed, noisy), SigrecParams::default()).unwrap()
}

#[test]
fn sigrec_construction() {
    let p = sig(1, false);
    let truth = p.truth().unwrap();
    let r = linalg::sub(&p.a().matvec(truth), p.b());
    assert_eq!(linalg::norm(&r), 0.0);
    assert_eq!(truth.iter().filter(|&&v| v != 0.0).count(), 2);
    assert_eq!(p.eta(), 1e-3 * linalg::norm_inf(&p.a().tmatvec(p.b())));
    assert!(p.norm_a_sq() <= 1.0);
    let q = sig(1, false);
    assert_eq!((p.a(), p.b()), (q.a(), q.b()));
    let noisy = sig(1, true);
    assert_eq!(noisy.a(), p.a());
    assert_ne!(noisy.b(), p.b());
    assert!(sigrec_make(&SigrecSpec::new(40, 40, 0, false), SigrecParams::default()).is_err());
}

#[test]
fn sigrec_rejects_small_mu() {
    let a = Matrix::identity(2);
    let params = SigrecParams { mu: 1.0, ..Default::default() };
    assert!(SignalRecovery::new(a, vec![1.0, 1.0], params).is_err());
}

#[test]
fn sigrec_direct_formulas_match_engine() {
    let p = sig(2, true);
    let q = 0.99 * p.rho() / 4.0;
    let s = InertialSchedule::symmetric(q, q, p.rho());
    let g = p.geometries();
    let (x0, y0) = p.zero_start();
    let mut st = SolverState::new(x0, y0);
    for _ in 0..40 {
        let x1 = sigrec_x_update(&p, &st, &s);
        let y1 = sigrec_y_update(&p, &x1, &st, &s);
        step(&mut st, &p, &g, &s, Variant::Tibpalm).unwrap();
        assert!(linalg::dist(&st.x_k, &x1) < 1e-12);
        assert!(linalg::dist(&st.y_k, &y1) < 1e-12);
    }
}

#[test]
fn sigrec_x_update_fixed_point_and_optimality() {
    // A = 0, b = 0, x = y, no inertia: x is a fixed point.
    let p = SignalRecovery::new(Matrix::zeros(2, 3), vec![0.0, 0.0], SigrecParams { eta_factor: 1.0, ..Default::default() });
    assert!(p.is_err(), "η = 0 is rejected");
    let p = sig(3, false);
    let s = InertialSchedule::symmetric(0.1, 0.05, p.rho());
    let g = p.geometries();
    let mut st = SolverState::new(p.zero_start().0, p.zero_start().1);
    for _ in 0..30 {
        let x1 = sigrec_x_update(&p, &st, &s);
        // ∇ of the x-subproblem: Aᵀ(Ax − b) + γ(x_k − y_k) + drift + ∇φ(x) − ∇φ(x_k)
        let (a1, a2, _, _) = s.at(st.iter);
        let mut r = p.a().tmatvec(&linalg::sub(&p.a().matvec(&x1), p.b()));
        linalg::axpy(p.params().gamma, &linalg::sub(&st.x_k, &st.y_k), &mut r);
        linalg::axpy(1.0, &inertial_drift(a1, a2, &st.x_k, &st.x_km1, &st.x_km2), &mut r);
        linalg::axpy(1.0, &g.x.grad_difference(&x1, &st.x_k).unwrap(), &mut r);
        assert!(linalg::norm(&r) <= 1e-10, "{}", linalg::norm(&r));
        step(&mut st, &p, &g, &s, Variant::Tibpalm).unwrap();
    }
}

#[test]
fn sigrec_y_update_against_scalar_oracle() {
    let p = sig(4, true);
    let s = InertialSchedule::symmetric(0.1, 0.05, p.rho());
    let mut st = SolverState::new(p.zero_start().0, p.zero_start().1);
    let g = p.geometries();
    for _ in 0..5 {
        step(&mut st, &p, &g, &s, Variant::Tibpalm).unwrap();
    }
    let x1 = sigrec_x_update(&p, &st, &s);
    let y1 = sigrec_y_update(&p, &x1, &st, &s);
    let lam = p.params().lambda;
    let (_, _, b1, b2) = s.at(st.iter);
    let drift = inertial_drift(b1, b2, &st.y_k, &st.y_km1, &st.y_km2);
    for i in 0..y1.len() {
        // argmin η√|t| + ⟨t, γ(y_k − x⁺) + drift⟩ + (λ/2)(t − y_k)²
        let lin = p.params().gamma * (st.y_k[i] - x1[i]) + drift[i];
        let h = |t: f64| p.eta() * t.abs().sqrt() + t * lin + 0.5 * lam * (t - st.y_k[i]).powi(2);
        let mut best = 0.0;
        let mut t = -6.0;
        while t <= 6.0 {
            if h(t) < h(best) {
                best = t;
            }
            t += 1e-4;
        }
        let (mut lo, mut hi) = (best - 1e-4, best + 1e-4);
        for _ in 0..100 {
            let c = hi - 0.618 * (hi - lo);
            let d = lo + 0.618 * (hi - lo);
            if h(c) < h(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        let o = if best == 0.0 { 0.0 } else { 0.5 * (lo + hi) };
        assert!((y1[i] - o).abs() < 1e-6, "coordinate {i}: {} vs {o}", y1[i]);
    }
}

#[test]
fn sigrec_y_update_limits() {
    let p = sig(5, false);
    let s = InertialSchedule::none(p.rho());
    // γ = 0 and no inertia: y⁺ = H(y_k, η/λ).
    let p0 = SignalRecovery::new(p.a().clone(), p.b().to_vec(), SigrecParams { gamma: 0.0, ..Default::default() }).unwrap();
    let y: Vector = (0..p.a().cols()).map(|i| (i as f64 * 0.37).sin()).collect();
    let st = SolverState::new(vec![0.0; y.len()], y.clone());
    let out = sigrec_y_update(&p0, &st.x_k, &st, &s);
    assert_eq!(out, prox::half_shrinkage(&y, p0.eta() / p0.params().lambda).unwrap());
}

#[test]
fn sigrec_terminal_point_is_x_stationary() {
    let p = sig(6, true);
    let q = 0.99 * p.rho() / 4.0;
    let opts = RunOptions::new(Variant::Tibpalm, InertialSchedule::symmetric(q, q, p.rho()), StoppingRule::new(1e-9, 500_000));
    let mut worst_gap: f64 = 0.0;
    let (x0, y0) = p.zero_start();
    let t = run_with_observer(&p, &p.geometries(), &opts, x0, y0, |st, _| {
        worst_gap = worst_gap.max(linalg::dist(&st.x_k, &st.y_k));
    })
    .unwrap();
    assert!(t.summary.converged());
    // γ(x − y) + Aᵀ(Ax − b) = 0 at an x-block critical point.
    let mut r = p.a().tmatvec(&linalg::sub(&p.a().matvec(&t.x), p.b()));
    linalg::axpy(p.params().gamma, &linalg::sub(&t.x, &t.y), &mut r);
    assert!(linalg::norm(&r) < 1e-7, "{}", linalg::norm(&r));
    // The split gap stays bounded along the run.
    assert!(worst_gap.is_finite() && worst_gap < 10.0 * (1.0 + linalg::norm(p.b())));
    assert!(t.records.last().unwrap().residual.unwrap() < 1e-6);
}

#[test]
fn sigrec_euclidean_and_dense_mahalanobis_paths() {
    let p = sig(7, false);
    let e = p.euclidean_geometries();
    let rho = compute_rho(&p, &e).unwrap();
    let t = run(&p, &e, &RunOptions::new(Variant::Bpalm, InertialSchedule::none(rho), StoppingRule::new(1e-6, 100_000)), p.zero_start().0, p.zero_start().1)
        .unwrap();
    assert!(t.summary.converged());
    // A dense copy of the native kernel gives the same iterates as the fast path.
    let dense = bregman::make_mahalanobis(&p.x_geometry().mahalanobis_form().unwrap().matrix().clone()).unwrap();
    let g2 = Geometries::new(dense, p.y_geometry());
    let s = InertialSchedule::none(p.rho());
    let mut a = SolverState::new(p.zero_start().0, p.zero_start().1);
    let mut b = a.clone();
    for _ in 0..10 {
        step(&mut a, &p, &p.geometries(), &s, Variant::Bpalm).unwrap();
        step(&mut b, &p, &g2, &s, Variant::Bpalm).unwrap();
    }
    assert!(linalg::dist(&a.x_k, &b.x_k) < 1e-9);
    assert!(matches!(tibpalm_core::problems::sigrec::sigrec_x_geometry(&p, GeometryKind::KullbackLeibler), Err(ProblemError::Unsupported(_))));
}

#[test]
fn sigrec_tibam_blocks_are_exact() {
    let p = sig(8, true);
    let s = InertialSchedule::none(p.rho());
    let mut st = SolverState::new(p.zero_start().0, vec![0.5; p.a().cols()]);
    let y0 = st.y_k.clone();
    step(&mut st, &p, &p.geometries(), &s, Variant::Tibam).unwrap();
    // x-block optimality with the coupling kept whole.
    let mut r = p.a().tmatvec(&linalg::sub(&p.a().matvec(&st.x_k), p.b()));
    linalg::axpy(p.params().gamma, &linalg::sub(&st.x_k, &y0), &mut r);
    linalg::axpy(1.0, &p.x_geometry().grad_difference(&st.x_k, &vec![0.0; y0.len()]).unwrap(), &mut r);
    assert!(linalg::norm(&r) < 1e-10);
}
