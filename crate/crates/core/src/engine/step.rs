use std::fmt;
use std::str::FromStr;

use crate::bregman::{BregmanGeometry, GeometryKind};
use crate::linalg::{self, Vector};

use super::problem::{Block, BlockRequest, BlockSolution, CoupledProblem, ProblemError};
use super::schedule::InertialSchedule;
use super::state::SolverState;
use super::EngineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Tibpalm,
    Ibpalm,
    Bpalm,
    Palm,
    Ipalm,
    Gipalm,
    Tibam,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Tibpalm,
        Variant::Ibpalm,
        Variant::Bpalm,
        Variant::Palm,
        Variant::Ipalm,
        Variant::Gipalm,
        Variant::Tibam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Tibpalm => "tibpalm",
            Variant::Ibpalm => "ibpalm",
            Variant::Bpalm => "bpalm",
            Variant::Palm => "palm",
            Variant::Ipalm => "ipalm",
            Variant::Gipalm => "gipalm",
            Variant::Tibam => "tibam",
        }
    }

    /// Schedule the variant actually uses: one-step variants drop the second
    /// coefficients, the plain variants drop all inertia.
    pub fn effective_schedule(self, s: &InertialSchedule) -> InertialSchedule {
        match self {
            Variant::Tibpalm | Variant::Tibam => *s,
            Variant::Ibpalm | Variant::Ipalm | Variant::Gipalm => s.without_second_step(),
            Variant::Bpalm | Variant::Palm => s.without_inertia(),
        }
    }

    pub fn requires_euclidean(self) -> bool {
        matches!(self, Variant::Palm | Variant::Ipalm | Variant::Gipalm)
    }

    /// Whether the descent theory (benefit function, margin `a`)
    /// applies to this variant's iteration.
    pub fn has_descent_theory(self) -> bool {
        matches!(self, Variant::Tibpalm | Variant::Ibpalm | Variant::Bpalm | Variant::Palm)
    }

    /// Rejects combinations the iteration cannot run.
    pub fn check_capability(
        self,
        problem: &dyn CoupledProblem,
        geoms: &Geometries,
    ) -> Result<(), EngineError> {
        if self.requires_euclidean() {
            for (block, g) in [(Block::X, &geoms.x), (Block::Y, &geoms.y)] {
                if g.kind() != GeometryKind::Euclidean {
                    return Err(EngineError::Capability {
                        variant: self,
                        reason: format!("{block}-block geometry must be euclid, got {}", g.kind()),
                    });
                }
            }
        }
        if self == Variant::Tibam && !problem.supports_exact() {
            return Err(EngineError::Capability {
                variant: self,
                reason: "problem has no exact block minimizer".to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == t)
            .ok_or_else(|| EngineError::UnknownVariant(s.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct Geometries {
    pub x: BregmanGeometry,
    pub y: BregmanGeometry,
}

impl Geometries {
    pub fn new(x: BregmanGeometry, y: BregmanGeometry) -> Self {
        Self { x, y }
    }
}

/// `ρ = min{θ₁ − L₁⁺, θ₂ − L₂⁺}`, when the problem reports its moduli.
pub fn compute_rho(problem: &dyn CoupledProblem, geoms: &Geometries) -> Option<f64> {
    let (l1, l2) = problem.coupling_lipschitz()?;
    Some((geoms.x.theta() - l1).min(geoms.y.theta() - l2))
}

/// `α₁(z_{k−1} − z_k) + α₂(z_{k−2} − z_{k−1})`, the coefficient of the
/// inertial linear term `α₁⟨u, z_{k−1} − z_k⟩ + α₂⟨u, z_{k−2} − z_{k−1}⟩`.
pub fn inertial_drift(a1: f64, a2: f64, z_k: &[f64], z_km1: &[f64], z_km2: &[f64]) -> Vector {
    z_k.iter()
        .zip(z_km1)
        .zip(z_km2)
        .map(|((&c, &p), &pp)| a1 * (p - c) + a2 * (pp - p))
        .collect()
}

/// Per-step bookkeeping.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub inner_x: usize,
    pub inner_y: usize,
    /// Norm of the subgradient certificate of `L` at the new point, built
    /// from the block optimality conditions.
    pub residual: f64,
}

struct BlockOutcome {
    sol: BlockSolution,
    /// Element of `∂h(u⁺)` read off the block optimality condition. Adding
    /// `∇_u Q` at the new point gives an element of `∂_u L`.
    certificate: Vector,
}

fn fault(block: Block, iter: usize, source: ProblemError) -> EngineError {
    EngineError::Fault { block, iter, source }
}

#[allow(clippy::too_many_arguments)]
fn solve_block(
    problem: &dyn CoupledProblem,
    block: Block,
    exact: bool,
    geometry: &BregmanGeometry,
    anchor: &[f64],
    linear: &[f64],
    other: &[f64],
    iter: usize,
) -> Result<BlockOutcome, EngineError> {
    let req = BlockRequest { anchor, linear, geometry, other };
    let sol = match (block, exact) {
        (Block::X, false) => problem.solve_x(&req),
        (Block::Y, false) => problem.solve_y(&req),
        (Block::X, true) => problem.solve_x_exact(&req),
        (Block::Y, true) => problem.solve_y_exact(&req),
    }
    .map_err(|e| fault(block, iter, e))?;
    if !linalg::all_finite(&sol.value) {
        return Err(fault(block, iter, ProblemError::Invalid("non-finite block iterate".into())));
    }
    let mut certificate =
        geometry.grad_difference(anchor, &sol.value).map_err(|e| fault(block, iter, e.into()))?;
    linalg::axpy(-1.0, linear, &mut certificate);
    if exact {
        let gq = match block {
            Block::X => problem.grad_x_coupling(&sol.value, other),
            Block::Y => problem.grad_y_coupling(other, &sol.value),
        };
        linalg::axpy(-1.0, &gq, &mut certificate);
    }
    Ok(BlockOutcome { sol, certificate })
}

fn geometry_for(
    problem: &dyn CoupledProblem,
    configured: &BregmanGeometry,
    block: Block,
    x: &[f64],
    y: &[f64],
) -> BregmanGeometry {
    problem.step_geometry(block, x, y).unwrap_or_else(|| configured.clone())
}

/// One sweep of `variant` (x-block, then y-block) and a window shift.
///
/// `sched` is the configured schedule; the variant's reduction is applied
/// here so callers never pass a pre-reduced schedule by accident.
pub fn step(
    state: &mut SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    sched: &InertialSchedule,
    variant: Variant,
) -> Result<StepInfo, EngineError> {
    let k = state.iter;
    let eff = variant.effective_schedule(sched);
    let (a1, a2, b1, b2) = eff.at(k);
    let (xo, yo, x_tilde, y_tilde) = match variant {
        Variant::Tibpalm | Variant::Ibpalm | Variant::Bpalm | Variant::Palm => {
            let (xo, yo) = linearized_sweep(state, problem, geoms, (a1, a2, b1, b2), k)?;
            (xo, yo, None, None)
        }
        Variant::Tibam => {
            let (xo, yo) = exact_sweep(state, problem, geoms, (a1, a2, b1, b2), k)?;
            (xo, yo, None, None)
        }
        Variant::Ipalm => {
            let (xo, yo) = ipalm_sweep(state, problem, geoms, a1, b1, k)?;
            (xo, yo, None, None)
        }
        Variant::Gipalm => {
            let (xo, yo, xt, yt) = gipalm_sweep(state, problem, geoms, a1, b1, k)?;
            (xo, yo, Some(xt), Some(yt))
        }
    };
    let x_new = xo.sol.value;
    let y_new = yo.sol.value;
    let mut cert = xo.certificate;
    linalg::axpy(1.0, &problem.grad_x_coupling(&x_new, &y_new), &mut cert);
    let mut cert_y = yo.certificate;
    linalg::axpy(1.0, &problem.grad_y_coupling(&x_new, &y_new), &mut cert_y);
    let residual = (linalg::norm_sq(&cert) + linalg::norm_sq(&cert_y)).sqrt();
    state.shift(x_new, y_new);
    state.x_tilde = x_tilde.unwrap_or_else(|| state.x_k.clone());
    state.y_tilde = y_tilde.unwrap_or_else(|| state.y_k.clone());
    Ok(StepInfo { inner_x: xo.sol.inner_iters, inner_y: yo.sol.inner_iters, residual })
}

fn linearized_sweep(
    s: &SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    (a1, a2, b1, b2): (f64, f64, f64, f64),
    k: usize,
) -> Result<(BlockOutcome, BlockOutcome), EngineError> {
    let mut lin_x = problem.grad_x_coupling(&s.x_k, &s.y_k);
    linalg::axpy(1.0, &inertial_drift(a1, a2, &s.x_k, &s.x_km1, &s.x_km2), &mut lin_x);
    let gx = geometry_for(problem, &geoms.x, Block::X, &s.x_k, &s.y_k);
    let xo = solve_block(problem, Block::X, false, &gx, &s.x_k, &lin_x, &s.y_k, k)?;
    let x1 = &xo.sol.value;

    let mut lin_y = problem.grad_y_coupling(x1, &s.y_k);
    linalg::axpy(1.0, &inertial_drift(b1, b2, &s.y_k, &s.y_km1, &s.y_km2), &mut lin_y);
    let gy = geometry_for(problem, &geoms.y, Block::Y, x1, &s.y_k);
    let yo = solve_block(problem, Block::Y, false, &gy, &s.y_k, &lin_y, x1, k)?;
    Ok((xo, yo))
}

fn exact_sweep(
    s: &SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    (a1, a2, b1, b2): (f64, f64, f64, f64),
    k: usize,
) -> Result<(BlockOutcome, BlockOutcome), EngineError> {
    let lin_x = inertial_drift(a1, a2, &s.x_k, &s.x_km1, &s.x_km2);
    let xo = solve_block(problem, Block::X, true, &geoms.x, &s.x_k, &lin_x, &s.y_k, k)?;
    let lin_y = inertial_drift(b1, b2, &s.y_k, &s.y_km1, &s.y_km2);
    let yo = solve_block(problem, Block::Y, true, &geoms.y, &s.y_k, &lin_y, &xo.sol.value, k)?;
    Ok((xo, yo))
}

fn extrapolate(z: &[f64], z_prev: &[f64], c: f64) -> Vector {
    z.iter().zip(z_prev).map(|(a, b)| a + c * (a - b)).collect()
}

/// Inertial sweep with shared coefficients. The proximal anchor `u` and the gradient
/// point `v` share one coefficient per block: `α₁ₖ` for x, `β₁ₖ` for y.
fn ipalm_sweep(
    s: &SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    a: f64,
    b: f64,
    k: usize,
) -> Result<(BlockOutcome, BlockOutcome), EngineError> {
    let u1 = extrapolate(&s.x_k, &s.x_km1, a);
    let lin_x = problem.grad_x_coupling(&u1, &s.y_k);
    let gx = geometry_for(problem, &geoms.x, Block::X, &u1, &s.y_k);
    let xo = solve_block(problem, Block::X, false, &gx, &u1, &lin_x, &s.y_k, k)?;
    let x1 = &xo.sol.value;

    let u2 = extrapolate(&s.y_k, &s.y_km1, b);
    let lin_y = problem.grad_y_coupling(x1, &u2);
    let gy = geometry_for(problem, &geoms.y, Block::Y, x1, &u2);
    let yo = solve_block(problem, Block::Y, false, &gy, &u2, &lin_y, x1, k)?;
    Ok((xo, yo))
}

/// Gauss–Seidel inertial sweep on the tilde sequences.
fn gipalm_sweep(
    s: &SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    a: f64,
    b: f64,
    k: usize,
) -> Result<(BlockOutcome, BlockOutcome, Vector, Vector), EngineError> {
    let lin_x = problem.grad_x_coupling(&s.x_tilde, &s.y_tilde);
    let gx = geometry_for(problem, &geoms.x, Block::X, &s.x_tilde, &s.y_tilde);
    let xo = solve_block(problem, Block::X, false, &gx, &s.x_tilde, &lin_x, &s.y_tilde, k)?;
    let xt = extrapolate(&xo.sol.value, &s.x_tilde, a);

    let lin_y = problem.grad_y_coupling(&xt, &s.y_tilde);
    let gy = geometry_for(problem, &geoms.y, Block::Y, &xt, &s.y_tilde);
    let yo = solve_block(problem, Block::Y, false, &gy, &s.y_tilde, &lin_y, &xt, k)?;
    let yt = extrapolate(&yo.sol.value, &s.y_tilde, b);
    Ok((xo, yo, xt, yt))
}

pub fn tibpalm_step(
    state: &mut SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    sched: &InertialSchedule,
) -> Result<StepInfo, EngineError> {
    step(state, problem, geoms, sched, Variant::Tibpalm)
}

pub fn palm_step(
    state: &mut SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
) -> Result<StepInfo, EngineError> {
    step(state, problem, geoms, &InertialSchedule::none(1.0), Variant::Palm)
}

pub fn ipalm_step(
    state: &mut SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    sched: &InertialSchedule,
) -> Result<StepInfo, EngineError> {
    step(state, problem, geoms, sched, Variant::Ipalm)
}

pub fn gipalm_step(
    state: &mut SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    sched: &InertialSchedule,
) -> Result<StepInfo, EngineError> {
    step(state, problem, geoms, sched, Variant::Gipalm)
}

pub fn tibam_step(
    state: &mut SolverState,
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    sched: &InertialSchedule,
) -> Result<StepInfo, EngineError> {
    step(state, problem, geoms, sched, Variant::Tibam)
}
