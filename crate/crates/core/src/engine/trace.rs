use std::fmt;
use std::time::Instant;

use crate::linalg::{self, Vector};

use super::diagnostics::benefit_from_window;
use super::problem::CoupledProblem;
use super::schedule::{validate_schedule, InertialSchedule};
use super::state::SolverState;
use super::step::{step, Geometries, Variant};
use super::EngineError;

/// Runs are declared diverged once `L` exceeds its starting value by this.
pub const DIVERGENCE_GAP: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoppingRule {
    /// Stop once `‖x_{k+1} − x_k‖ + ‖y_{k+1} − y_k‖ < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Record wall-clock time per iteration. Off gives byte-identical traces.
    pub record_timing: bool,
}

impl StoppingRule {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter, record_timing: false }
    }

    pub fn timed(mut self) -> Self {
        self.record_timing = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Converged,
    MaxIter,
    Diverged,
    Fault(String),
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max-iter",
            Termination::Diverged => "diverged",
            Termination::Fault(_) => "fault",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Fault(msg) => write!(f, "fault: {msg}"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// `L(z_k)`.
    pub objective: f64,
    /// `H(z_k, z_{k−1}, z_{k−2})`.
    pub benefit: f64,
    /// `Δ_k = ‖z_k − z_{k−1}‖`.
    pub delta: f64,
    /// `E_k = ‖x_k − x_{k−1}‖ + ‖y_k − y_{k−1}‖`.
    pub ek: f64,
    pub inner_x: usize,
    pub inner_y: usize,
    pub elapsed_ms: f64,
    /// Norm of the subgradient certificate at `z_k` (absent at `k = 0`).
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub variant: Variant,
    pub iterations: usize,
    pub elapsed_ms: f64,
    /// `‖x_k − y_k‖` when both blocks live in the same space.
    pub terminal_gap: Option<f64>,
    pub termination: Termination,
    /// Set when the schedule fails `2(α₁ + α₂) < ρ` and ran on override.
    pub theory_unsupported: bool,
    /// Descent margin `a`, when the schedule is admissible.
    pub margin: Option<f64>,
    pub total_inner_x: usize,
    pub total_inner_y: usize,
}

impl RunSummary {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub summary: RunSummary,
    pub x: Vector,
    pub y: Vector,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub variant: Variant,
    pub schedule: InertialSchedule,
    pub stop: StoppingRule,
    /// Run even when the schedule is inadmissible; the trace is flagged.
    pub override_theory: bool,
}

impl RunOptions {
    pub fn new(variant: Variant, schedule: InertialSchedule, stop: StoppingRule) -> Self {
        Self { variant, schedule, stop, override_theory: false }
    }

    pub fn with_override(mut self, on: bool) -> Self {
        self.override_theory = on;
        self
    }
}

/// Configuration checks shared by [`run`] and callers that want to fail
/// before building a start point. Returns the margin and the override flag.
pub fn preflight(
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    opts: &RunOptions,
) -> Result<(Option<f64>, bool), EngineError> {
    opts.variant.check_capability(problem, geoms)?;
    let eff = opts.variant.effective_schedule(&opts.schedule);
    match validate_schedule(&eff) {
        Ok(a) => Ok((Some(a), false)),
        Err(e) if opts.override_theory => {
            let _ = e;
            Ok((None, true))
        }
        Err(e) => Err(e),
    }
}

pub fn run(
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    opts: &RunOptions,
    x0: Vector,
    y0: Vector,
) -> Result<RunTrace, EngineError> {
    run_with_observer(problem, geoms, opts, x0, y0, |_, _| {})
}

/// [`run`], calling `observe` after every record (including `k = 0`).
pub fn run_with_observer<F>(
    problem: &dyn CoupledProblem,
    geoms: &Geometries,
    opts: &RunOptions,
    x0: Vector,
    y0: Vector,
    mut observe: F,
) -> Result<RunTrace, EngineError>
where
    F: FnMut(&SolverState, &TraceRecord),
{
    let (margin, theory_unsupported) = preflight(problem, geoms, opts)?;
    if x0.len() != problem.x_dim() || y0.len() != problem.y_dim() {
        return Err(EngineError::Dimension {
            expected: (problem.x_dim(), problem.y_dim()),
            got: (x0.len(), y0.len()),
        });
    }
    geoms.x.check_domain(&x0).map_err(EngineError::Start)?;
    geoms.y.check_domain(&y0).map_err(EngineError::Start)?;

    let eff = opts.variant.effective_schedule(&opts.schedule);
    let (h1, h2) = (eff.alpha1_bound(), eff.alpha2_bound());
    let started = Instant::now();
    let clock = |t: &Instant| if opts.stop.record_timing { t.elapsed().as_secs_f64() * 1e3 } else { 0.0 };

    let mut state = SolverState::new(x0, y0);
    let l0 = problem.objective(&state.x_k, &state.y_k);
    let mut records = Vec::new();
    let first = TraceRecord {
        k: 0,
        objective: l0,
        benefit: l0,
        delta: 0.0,
        ek: 0.0,
        inner_x: 0,
        inner_y: 0,
        elapsed_ms: clock(&started),
        residual: None,
    };
    observe(&state, &first);
    records.push(first);

    let mut termination = if !l0.is_finite() {
        Termination::Diverged
    } else if opts.stop.tol == f64::INFINITY {
        Termination::Converged
    } else {
        Termination::MaxIter
    };
    let (mut total_x, mut total_y) = (0, 0);
    if termination == Termination::MaxIter {
        while state.iter < opts.stop.max_iter {
            let info = match step(&mut state, problem, geoms, &opts.schedule, opts.variant) {
                Ok(info) => info,
                Err(e) => {
                    termination = Termination::Fault(e.to_string());
                    break;
                }
            };
            total_x += info.inner_x;
            total_y += info.inner_y;
            let objective = problem.objective(&state.x_k, &state.y_k);
            let rec = TraceRecord {
                k: state.iter,
                objective,
                benefit: benefit_from_window(objective, &state, h1, h2),
                delta: state.delta(),
                ek: state.step_length(),
                inner_x: info.inner_x,
                inner_y: info.inner_y,
                elapsed_ms: clock(&started),
                residual: Some(info.residual),
            };
            observe(&state, &rec);
            let ek = rec.ek;
            records.push(rec);
            if !state.is_finite() || !objective.is_finite() || objective > l0 + DIVERGENCE_GAP {
                termination = Termination::Diverged;
                break;
            }
            if ek < opts.stop.tol {
                termination = Termination::Converged;
                break;
            }
        }
    }

    let terminal_gap =
        (state.x_k.len() == state.y_k.len()).then(|| linalg::dist(&state.x_k, &state.y_k));
    let summary = RunSummary {
        variant: opts.variant,
        iterations: state.iter,
        elapsed_ms: clock(&started),
        terminal_gap,
        termination,
        theory_unsupported,
        margin,
        total_inner_x: total_x,
        total_inner_y: total_y,
    };
    Ok(RunTrace { records, summary, x: state.x_k, y: state.y_k })
}
