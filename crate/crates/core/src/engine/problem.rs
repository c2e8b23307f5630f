use thiserror::Error;

use crate::bregman::{BregmanError, BregmanGeometry};
use crate::linalg::{LinalgError, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    X,
    Y,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Block::X => "x",
            Block::Y => "y",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Domain(#[from] BregmanError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("inner solver stopped after {iters} iterations with residual {residual:e}")]
    InnerCap { iters: usize, residual: f64 },
    #[error("{0} is not supported by this problem")]
    Unsupported(&'static str),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// One block subproblem:
///
/// `argmin_u  h(u) + ⟨u, linear⟩ + D_φ(u, anchor)`
///
/// where `h` is the block's own nonsmooth term (`f` or `g`). For the exact
/// variants the coupling `Q(·, other)` is added to the objective instead of
/// being linearized into `linear`.
#[derive(Clone, Copy, Debug)]
pub struct BlockRequest<'a> {
    pub anchor: &'a [f64],
    pub linear: &'a [f64],
    pub geometry: &'a BregmanGeometry,
    /// Frozen value of the other block.
    pub other: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSolution {
    pub value: Vector,
    pub inner_iters: usize,
}

impl BlockSolution {
    pub fn closed_form(value: Vector) -> Self {
        Self { value, inner_iters: 1 }
    }
}

/// `L(x, y) = f(x) + Q(x, y) + g(y)` with block subproblem oracles.
pub trait CoupledProblem: Sync {
    fn x_dim(&self) -> usize;
    fn y_dim(&self) -> usize;

    fn f(&self, x: &[f64]) -> f64;
    fn g(&self, y: &[f64]) -> f64;
    fn coupling(&self, x: &[f64], y: &[f64]) -> f64;

    fn objective(&self, x: &[f64], y: &[f64]) -> f64 {
        self.f(x) + self.coupling(x, y) + self.g(y)
    }

    fn grad_x_coupling(&self, x: &[f64], y: &[f64]) -> Vector;
    fn grad_y_coupling(&self, x: &[f64], y: &[f64]) -> Vector;

    /// Upper bounds `(L₁⁺, L₂⁺)` on the block Lipschitz moduli of ∇Q over
    /// the operating region, if the problem can supply them.
    fn coupling_lipschitz(&self) -> Option<(f64, f64)>;

    fn solve_x(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError>;
    fn solve_y(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError>;

    fn supports_exact(&self) -> bool {
        false
    }

    /// Same as [`solve_x`](Self::solve_x) but with `Q(·, other)` kept whole.
    fn solve_x_exact(&self, _req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        Err(ProblemError::Unsupported("exact x-block minimization"))
    }

    fn solve_y_exact(&self, _req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        Err(ProblemError::Unsupported("exact y-block minimization"))
    }

    /// Per-iteration geometry replacing the configured one (adaptive step
    /// sizes). `x`, `y` are the linearization point of the block update.
    fn step_geometry(&self, _block: Block, _x: &[f64], _y: &[f64]) -> Option<BregmanGeometry> {
        None
    }
}
