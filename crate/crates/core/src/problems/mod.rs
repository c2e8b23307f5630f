//! The three benchmark families as [`CoupledProblem`](crate::engine::CoupledProblem)s.

pub mod nmf;
pub mod qfp;
pub mod sigrec;

pub use nmf::{nmf_grad_x, nmf_grad_y, nmf_objective, nmf_stepsizes, SparseNmf};
pub use qfp::{Qfp, QfpParams};
pub use sigrec::{
    sigrec_make, sigrec_x_update, sigrec_y_update, SignalRecovery, SigrecParams, SigrecSpec,
};
