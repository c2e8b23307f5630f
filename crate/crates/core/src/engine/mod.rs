//! The inertial Bregman alternating iteration, its reductions and baselines.

mod diagnostics;
mod problem;
mod schedule;
mod state;
mod step;
mod trace;

use thiserror::Error;

use crate::bregman::BregmanError;

pub use diagnostics::{
    benefit_h, criticality_residual, sufficient_decrease_check, sufficient_decrease_slacks,
    sum_delta_sq, DecreaseReport,
};
pub use problem::{Block, BlockRequest, BlockSolution, CoupledProblem, ProblemError};
pub use schedule::{validate_schedule, InertialSchedule, InertialSequence};
pub use state::SolverState;
pub use step::{
    compute_rho, gipalm_step, inertial_drift, ipalm_step, palm_step, step, tibam_step,
    tibpalm_step, Geometries, StepInfo, Variant,
};
pub use trace::{
    preflight, run, run_with_observer, RunOptions, RunSummary, RunTrace, StoppingRule,
    Termination, TraceRecord, DIVERGENCE_GAP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("margin rho must be positive, got {0}")]
    NonPositiveRho(f64),
    #[error("inadmissible schedule: 2(alpha1 + alpha2) = {lhs} >= rho = {rho}")]
    Inadmissible { lhs: f64, rho: f64 },
    #[error("invalid inertial sequence {0:?} (expected a number in [0, 1] or \"(k-1)/(k+2)\")")]
    BadSequence(String),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("{variant} cannot run here: {reason}")]
    Capability { variant: Variant, reason: String },
    #[error("start point has dimensions {got:?}, problem expects {expected:?}")]
    Dimension { expected: (usize, usize), got: (usize, usize) },
    #[error("start point rejected: {0}")]
    Start(BregmanError),
    #[error("{block}-block solver failed at iteration {iter}: {source}")]
    Fault {
        block: Block,
        iter: usize,
        #[source]
        source: ProblemError,
    },
}
