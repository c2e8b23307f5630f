//! Descent and criticality diagnostics computed from iterates or traces.

use crate::linalg;

use super::problem::CoupledProblem;
use super::schedule::InertialSchedule;
use super::state::SolverState;
use super::step::{inertial_drift, Geometries};
use super::trace::TraceRecord;
use super::EngineError;

/// `H(u, v, w) = L(u) + ((α₁+α₂)/2)‖u − v‖² + (α₂/2)‖v − w‖²` with the
/// schedule bounds α₁, α₂. Each point is an `(x, y)` pair.
pub fn benefit_h(
    problem: &dyn CoupledProblem,
    sched: &InertialSchedule,
    z: (&[f64], &[f64]),
    z_prev: (&[f64], &[f64]),
    z_prev2: (&[f64], &[f64]),
) -> f64 {
    let d1 = linalg::dist_sq(z.0, z_prev.0) + linalg::dist_sq(z.1, z_prev.1);
    let d2 = linalg::dist_sq(z_prev.0, z_prev2.0) + linalg::dist_sq(z_prev.1, z_prev2.1);
    let (a1, a2) = (sched.alpha1_bound(), sched.alpha2_bound());
    problem.objective(z.0, z.1) + 0.5 * (a1 + a2) * d1 + 0.5 * a2 * d2
}

pub(crate) fn benefit_from_window(objective: f64, s: &SolverState, a1: f64, a2: f64) -> f64 {
    let d1 = linalg::dist_sq(&s.x_k, &s.x_km1) + linalg::dist_sq(&s.y_k, &s.y_km1);
    let d2 = linalg::dist_sq(&s.x_km1, &s.x_km2) + linalg::dist_sq(&s.y_km1, &s.y_km2);
    objective + 0.5 * (a1 + a2) * d1 + 0.5 * a2 * d2
}

/// `H_k − H_{k+1} − a·Δ²_{k+1}` for each consecutive pair of records.
pub fn sufficient_decrease_slacks(records: &[TraceRecord], a: f64) -> Vec<f64> {
    records
        .windows(2)
        .map(|w| w[0].benefit - w[1].benefit - a * w[1].delta * w[1].delta)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecreaseReport {
    pub slacks: Vec<f64>,
    /// Index `k` of the first pair `(k, k+1)` whose slack is below tolerance.
    pub first_violation: Option<usize>,
    pub worst_relative: f64,
}

impl DecreaseReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks every slack against `−tol_rel·(1 + |H_k|)`.
pub fn sufficient_decrease_check(records: &[TraceRecord], a: f64, tol_rel: f64) -> DecreaseReport {
    let slacks = sufficient_decrease_slacks(records, a);
    let mut first_violation = None;
    let mut worst_relative = f64::INFINITY;
    for (k, s) in slacks.iter().enumerate() {
        let scale = 1.0 + records[k].benefit.abs();
        worst_relative = worst_relative.min(s / scale);
        if *s < -tol_rel * scale && first_violation.is_none() {
            first_violation = Some(k);
        }
    }
    if slacks.is_empty() {
        worst_relative = 0.0;
    }
    DecreaseReport { slacks, first_violation, worst_relative }
}

/// `‖s_k‖` for the linearized iteration, from the window alone:
///
/// ```text
/// s_x = ∇ₓQ(z_k) − ∇ₓQ(z_{k−1}) + ∇φ₁(x_{k−1}) − ∇φ₁(x_k)
///       + α₁(x_{k−1} − x_{k−2}) + α₂(x_{k−2} − x_{k−3})
/// s_y = ∇ᵧQ(z_k) − ∇ᵧQ(x_k, y_{k−1}) + ∇φ₂(y_{k−1}) − ∇φ₂(y_k)
///       + β₁(y_{k−1} − y_{k−2}) + β₂(y_{k−2} − y_{k−3})
/// ```
///
/// with the coefficients of step `k − 1`. Uses the configured geometries;
/// problems with adaptive step geometries should read the residual from the
/// trace instead.
pub fn criticality_residual(
    state: &SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    sched: &InertialSchedule,
) -> Result<f64, EngineError> {
    if state.iter == 0 {
        return Ok(0.0);
    }
    let (a1, a2, b1, b2) = sched.at(state.iter - 1);
    let gx = |v: &[f64]| geoms.x.grad(v).map_err(EngineError::Start);
    let gy = |v: &[f64]| geoms.y.grad(v).map_err(EngineError::Start);

    let mut sx = problem.grad_x_coupling(&state.x_k, &state.y_k);
    linalg::axpy(-1.0, &problem.grad_x_coupling(&state.x_km1, &state.y_km1), &mut sx);
    linalg::axpy(1.0, &gx(&state.x_km1)?, &mut sx);
    linalg::axpy(-1.0, &gx(&state.x_k)?, &mut sx);
    // −drift evaluated on the shifted window gives the inertial terms.
    linalg::axpy(-1.0, &inertial_drift(a1, a2, &state.x_km1, &state.x_km2, &state.x_km3), &mut sx);

    let mut sy = problem.grad_y_coupling(&state.x_k, &state.y_k);
    linalg::axpy(-1.0, &problem.grad_y_coupling(&state.x_k, &state.y_km1), &mut sy);
    linalg::axpy(1.0, &gy(&state.y_km1)?, &mut sy);
    linalg::axpy(-1.0, &gy(&state.y_k)?, &mut sy);
    linalg::axpy(-1.0, &inertial_drift(b1, b2, &state.y_km1, &state.y_km2, &state.y_km3), &mut sy);

    Ok((linalg::norm_sq(&sx) + linalg::norm_sq(&sy)).sqrt())
}

/// `Σ Δ_k²` over a trace, the quantity bounded by `(L(z₀) − inf L)/a`.
pub fn sum_delta_sq(records: &[TraceRecord]) -> f64 {
    records.iter().map(|r| r.delta * r.delta).sum()
}
