//! Sparse nonnegative matrix factorization `A ≈ XY`:
//!
//! `min ι_{X ≥ 0, ‖Xᵢ‖₀ ≤ s}(X) + (λ/2)‖A − XY‖²_F + ι_{Y ≥ 0}(Y)`
//!
//! `X` is n×r and `Y` is r×d, both flattened row-major into the engine's
//! block vectors. Step sizes follow the current spectrum of the other block.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bregman::BregmanGeometry;
use crate::engine::{Block, BlockRequest, BlockSolution, CoupledProblem, ProblemError};
use crate::linalg::{self, Matrix, Vector};
use crate::prox::{self, SparsityBudget};

pub const STEP_SAFETY: f64 = 1.01;
pub const STEP_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SparseNmf {
    a: Matrix,
    rank: usize,
    budget: SparsityBudget,
    lambda: f64,
}

impl SparseNmf {
    pub fn new(a: Matrix, rank: usize, budget: SparsityBudget, lambda: f64) -> Result<Self, ProblemError> {
        if rank == 0 || rank > a.cols() {
            return Err(ProblemError::Invalid(format!(
                "rank {rank} must lie in 1..={} (columns of A)",
                a.cols()
            )));
        }
        if !a.is_finite() || !(lambda > 0.0) {
            return Err(ProblemError::Invalid("A must be finite and lambda positive".into()));
        }
        Ok(Self { a, rank, budget, lambda })
    }

    /// `A = W·H` with nonnegative uniform factors of the given inner rank.
    pub fn synthetic(
        n: usize,
        d: usize,
        rank: usize,
        budget: SparsityBudget,
        lambda: f64,
        seed: u64,
    ) -> Result<Self, ProblemError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(5);
        let mut draw = |len: usize| -> Vector { (0..len).map(|_| rng.random::<f64>()).collect() };
        let w = Matrix::new(n, rank, draw(n * rank))?;
        let h = Matrix::new(rank, d, draw(rank * d))?;
        Self::new(w.matmul(&h), rank, budget, lambda)
    }

    pub fn data(&self) -> &Matrix {
        &self.a
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn budget(&self) -> SparsityBudget {
        self.budget
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn x_shape(&self) -> (usize, usize) {
        (self.a.rows(), self.rank)
    }

    pub fn y_shape(&self) -> (usize, usize) {
        (self.rank, self.a.cols())
    }

    pub fn x_matrix(&self, x: &[f64]) -> Matrix {
        let (r, c) = self.x_shape();
        Matrix::new(r, c, x.to_vec()).expect("x has the X shape")
    }

    pub fn y_matrix(&self, y: &[f64]) -> Matrix {
        let (r, c) = self.y_shape();
        Matrix::new(r, c, y.to_vec()).expect("y has the Y shape")
    }

    /// Feasible random start: sparse nonnegative `X`, uniform `Y`.
    pub fn random_start(&self, seed: u64) -> (Vector, Vector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(6);
        let (n, r) = self.x_shape();
        let x: Vector = (0..n * r).map(|_| rng.random::<f64>()).collect();
        let y: Vector = (0..r * self.a.cols()).map(|_| rng.random::<f64>()).collect();
        (self.project_x(&x), y)
    }

    /// Column-wise sparse nonnegative projection of a flattened `X`.
    pub fn project_x(&self, x: &[f64]) -> Vector {
        let (n, r) = self.x_shape();
        let mut out = vec![0.0; n * r];
        let mut col = vec![0.0; n];
        for j in 0..r {
            for i in 0..n {
                col[i] = x[i * r + j];
            }
            let p = prox::project_sparse_nonneg(&col, self.budget);
            for i in 0..n {
                out[i * r + j] = p[i];
            }
        }
        out
    }

    /// Largest per-column nonzero count of a flattened `X`.
    pub fn max_column_nnz(&self, x: &[f64]) -> usize {
        let (n, r) = self.x_shape();
        (0..r).map(|j| (0..n).filter(|&i| x[i * r + j] != 0.0).count()).max().unwrap_or(0)
    }

    pub fn column_budget(&self) -> usize {
        self.budget.count(self.a.rows())
    }

    fn residual(&self, x: &Matrix, y: &Matrix) -> Matrix {
        x.matmul(y).sub(&self.a)
    }
}

/// `(λ/2)‖A − XY‖²_F`.
pub fn nmf_objective(p: &SparseNmf, x: &Matrix, y: &Matrix) -> f64 {
    0.5 * p.lambda * p.residual(x, y).frobenius_norm_sq()
}

/// `λ(XY − A)Yᵀ`.
pub fn nmf_grad_x(p: &SparseNmf, x: &Matrix, y: &Matrix) -> Matrix {
    p.residual(x, y).matmul(&y.transpose()).scaled(p.lambda)
}

/// `λXᵀ(XY − A)`.
pub fn nmf_grad_y(p: &SparseNmf, x: &Matrix, y: &Matrix) -> Matrix {
    x.transpose().matmul(&p.residual(x, y)).scaled(p.lambda)
}

/// `(1.01·λ·λ_max(YYᵀ), 1.01·λ·λ_max(XᵀX))`, each floored at 1e−8.
pub fn nmf_stepsizes(p: &SparseNmf, x: &Matrix, y: &Matrix) -> (f64, f64) {
    let step = |m: &Matrix| {
        let s = linalg::spectral_norm_sq_default(m).unwrap_or(f64::INFINITY);
        (STEP_SAFETY * p.lambda * s).max(STEP_FLOOR)
    };
    // λ_max(YYᵀ) = ‖Y‖², λ_max(XᵀX) = ‖X‖².
    (step(y), step(x))
}

fn euclid_scale(g: &BregmanGeometry) -> Result<f64, ProblemError> {
    match g {
        BregmanGeometry::Euclidean { mu } => Ok(*mu),
        _ => Err(ProblemError::Unsupported("sparse NMF with a non-euclid geometry")),
    }
}

impl CoupledProblem for SparseNmf {
    fn x_dim(&self) -> usize {
        self.a.rows() * self.rank
    }

    fn y_dim(&self) -> usize {
        self.rank * self.a.cols()
    }

    fn f(&self, x: &[f64]) -> f64 {
        let feasible = x.iter().all(|&v| v >= 0.0) && self.max_column_nnz(x) <= self.column_budget();
        if feasible {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn g(&self, y: &[f64]) -> f64 {
        if y.iter().all(|&v| v >= 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn coupling(&self, x: &[f64], y: &[f64]) -> f64 {
        nmf_objective(self, &self.x_matrix(x), &self.y_matrix(y))
    }

    fn grad_x_coupling(&self, x: &[f64], y: &[f64]) -> Vector {
        nmf_grad_x(self, &self.x_matrix(x), &self.y_matrix(y)).into_vec()
    }

    fn grad_y_coupling(&self, x: &[f64], y: &[f64]) -> Vector {
        nmf_grad_y(self, &self.x_matrix(x), &self.y_matrix(y)).into_vec()
    }

    /// The moduli `λ‖Y‖²`, `λ‖X‖²` move with the iterates; no fixed bound.
    fn coupling_lipschitz(&self) -> Option<(f64, f64)> {
        None
    }

    /// `P(anchor − linear/μ₁)` with the sparse nonnegative projection.
    fn solve_x(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        let mu = euclid_scale(req.geometry)?;
        let v: Vector = req.anchor.iter().zip(req.linear).map(|(a, l)| a - l / mu).collect();
        Ok(BlockSolution::closed_form(self.project_x(&v)))
    }

    fn solve_y(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        let mu = euclid_scale(req.geometry)?;
        let mut v: Vector = req.anchor.iter().zip(req.linear).map(|(a, l)| a - l / mu).collect();
        prox::project_nonneg_in_place(&mut v);
        Ok(BlockSolution::closed_form(v))
    }

    fn step_geometry(&self, block: Block, x: &[f64], y: &[f64]) -> Option<BregmanGeometry> {
        let m = match block {
            Block::X => self.y_matrix(y),
            Block::Y => self.x_matrix(x),
        };
        let s = linalg::spectral_norm_sq_default(&m).unwrap_or(f64::INFINITY);
        Some(BregmanGeometry::Euclidean { mu: (STEP_SAFETY * self.lambda * s).max(STEP_FLOOR) })
    }
}
