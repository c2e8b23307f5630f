//! Quadratic fractional programming over a box, split as
//!
//! `min f(x) + (γ/2)‖x − y‖² + ι_C(y)`,  `f(x) = (xᵀMx + aᵀx + c)/(bᵀx + d)`,
//!
//! with `C = [lo, hi]ᵐ`. The x-block keeps `f` whole and is solved by a
//! damped mirror fixed-point iteration; the y-block is separable and exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bregman::{self, BregmanGeometry, GeometryKind, OperatingBox};
use crate::engine::{BlockRequest, BlockSolution, CoupledProblem, Geometries, ProblemError};
use crate::linalg::{self, Matrix, Vector};

/// Problem 1 data: rows 0..5 are `M`, row 5 is `a`, row 6 is `b`.
pub const PROBLEM1_DATA: &str = include_str!("../../data/qfp_problem1.txt");

pub const INNER_TOL: f64 = 1e-8;
pub const INNER_CAP: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QfpParams {
    pub c: f64,
    pub d: f64,
    pub gamma: f64,
    pub lo: f64,
    pub hi: f64,
    /// Scale of both block geometries.
    pub mu: f64,
}

impl Default for QfpParams {
    fn default() -> Self {
        Self { c: -2.0, d: 20.0, gamma: 10.0, lo: 1.0, hi: 3.0, mu: 36.0 }
    }
}

#[derive(Clone, Debug)]
pub struct Qfp {
    m: Matrix,
    /// `(M + Mᵀ)/2`, used in the gradient.
    m_sym: Matrix,
    a: Vector,
    b: Vector,
    params: QfpParams,
}

impl Qfp {
    pub fn new(m: Matrix, a: Vector, b: Vector, params: QfpParams) -> Result<Self, ProblemError> {
        let dim = a.len();
        if m.shape() != (dim, dim) || b.len() != dim {
            return Err(ProblemError::Invalid(format!(
                "shapes disagree: M {:?}, a {}, b {}",
                m.shape(),
                dim,
                b.len()
            )));
        }
        if !(params.lo <= params.hi) || !(params.gamma >= 0.0) {
            return Err(ProblemError::Invalid(format!("bad parameters {params:?}")));
        }
        let p = Self { m_sym: m.symmetric_part(), m, a, b, params };
        let worst = p.min_denominator_on_box();
        if !(worst > 0.0) {
            return Err(ProblemError::Invalid(format!(
                "box is not inside bᵀx + d > 0 (minimum over the box is {worst})"
            )));
        }
        Ok(p)
    }

    /// The bundled Problem 1 instance.
    pub fn problem1(params: QfpParams) -> Result<Self, ProblemError> {
        let data = linalg::parse_matrix(PROBLEM1_DATA)
            .map_err(|e| ProblemError::Invalid(format!("bundled data: {e}")))?;
        Self::from_stacked(&data, params)
    }

    /// Reads `M`, `a`, `b` stacked as an `(m + 2) × m` matrix.
    pub fn from_stacked(data: &Matrix, params: QfpParams) -> Result<Self, ProblemError> {
        let m = data.cols();
        if data.rows() != m + 2 {
            return Err(ProblemError::Invalid(format!(
                "stacked data must be (m+2)×m, got {:?}",
                data.shape()
            )));
        }
        let mm = Matrix::new(m, m, data.as_slice()[..m * m].to_vec())?;
        Self::new(mm, data.row(m).to_vec(), data.row(m + 1).to_vec(), params)
    }

    /// Random `M` (entries in [−1, 1]), `a` and `b`; `b` is rescaled if
    /// needed so the box stays inside the feasible half-space.
    pub fn random(dim: usize, seed: u64, params: QfpParams) -> Result<Self, ProblemError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3);
        let mut draw = |len: usize| -> Vector { (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect() };
        let m = Matrix::new(dim, dim, draw(dim * dim))?;
        let a = draw(dim);
        let mut b = draw(dim);
        let worst: f64 = b.iter().map(|&bi| (bi * params.lo).min(bi * params.hi)).sum();
        if worst + params.d <= 0.5 * params.d {
            let s = 0.5 * params.d / (-worst);
            for v in &mut b {
                *v *= s;
            }
        }
        Self::new(m, a, b, params)
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn params(&self) -> &QfpParams {
        &self.params
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn operating_box(&self) -> OperatingBox {
        OperatingBox { lo: self.params.lo, hi: self.params.hi }
    }

    /// `min_{x ∈ C} bᵀx + d`, attained at a vertex.
    pub fn min_denominator_on_box(&self) -> f64 {
        let (lo, hi) = (self.params.lo, self.params.hi);
        self.b.iter().map(|&bi| (bi * lo).min(bi * hi)).sum::<f64>() + self.params.d
    }

    pub fn denominator(&self, x: &[f64]) -> f64 {
        linalg::dot(&self.b, x) + self.params.d
    }

    fn numerator(&self, x: &[f64]) -> f64 {
        linalg::dot(x, &self.m.matvec(x)) + linalg::dot(&self.a, x) + self.params.c
    }

    /// `f(x)`, or a domain error when `bᵀx + d ≤ 0`.
    pub fn value(&self, x: &[f64]) -> Result<f64, ProblemError> {
        let den = self.denominator(x);
        if !(den > 0.0) {
            return Err(ProblemError::Invalid(format!("bᵀx + d = {den} is not positive")));
        }
        Ok(self.numerator(x) / den)
    }

    /// `[(2M̃x + a)(bᵀx + d) − (xᵀMx + aᵀx + c)b]/(bᵀx + d)²`, `M̃ = (M + Mᵀ)/2`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vector, ProblemError> {
        let den = self.denominator(x);
        if !(den > 0.0) {
            return Err(ProblemError::Invalid(format!("bᵀx + d = {den} is not positive")));
        }
        let num = self.numerator(x);
        let mx = self.m_sym.matvec(x);
        Ok((0..x.len())
            .map(|i| ((2.0 * mx[i] + self.a[i]) * den - num * self.b[i]) / (den * den))
            .collect())
    }

    /// Uniform random point of the box.
    pub fn random_start(&self, seed: u64) -> Vector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(4);
        (0..self.dim()).map(|_| rng.random_range(self.params.lo..=self.params.hi)).collect()
    }

    fn x_residual(&self, x: &[f64], req: &BlockRequest<'_>, g_anchor: &[f64]) -> Option<f64> {
        if !req.geometry.in_domain(x) {
            return None;
        }
        let gf = self.gradient(x).ok()?;
        let gp = req.geometry.grad(x).ok()?;
        let r: f64 = (0..x.len())
            .map(|i| {
                let t = gf[i] + req.linear[i] + gp[i] - g_anchor[i];
                t * t
            })
            .sum();
        Some(r.sqrt())
    }

    /// Solves `∇f(x) + linear + ∇φ(x) − ∇φ(anchor) = 0` by iterating
    /// `x ← (∇φ)⁻¹(∇φ(anchor) − ∇f(x) − linear)`, halving the step toward
    /// the candidate until the residual decreases.
    pub fn x_block_solve(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        let geom = req.geometry;
        let g_anchor = geom.grad(req.anchor)?;
        let tol = INNER_TOL * (1.0 + linalg::norm(&g_anchor));
        let mut x = req.anchor.to_vec();
        let mut r = self
            .x_residual(&x, req, &g_anchor)
            .ok_or_else(|| ProblemError::Invalid("anchor outside bᵀx + d > 0".into()))?;
        let mut iters = 0;
        while r > tol {
            if iters == INNER_CAP {
                return Err(ProblemError::InnerCap { iters, residual: r });
            }
            iters += 1;
            let gf = self.gradient(&x)?;
            let v: Vector = (0..x.len()).map(|i| g_anchor[i] - gf[i] - req.linear[i]).collect();
            let target = match geom.inv_grad(&v) {
                Ok(t) => t,
                // Out of the mirror range (IS needs v < 0): fall back to a
                // short step along the residual direction in the dual.
                Err(_) => {
                    let gx = geom.grad(&x)?;
                    let w: Vector = (0..x.len()).map(|i| 0.5 * gx[i] + 0.5 * v[i]).collect();
                    geom.inv_grad(&w).unwrap_or_else(|_| x.clone())
                }
            };
            let mut t = 1.0;
            let mut accepted = None;
            while t >= 1e-6 {
                let cand: Vector = (0..x.len()).map(|i| x[i] + t * (target[i] - x[i])).collect();
                if let Some(rc) = self.x_residual(&cand, req, &g_anchor) {
                    if rc < r {
                        accepted = Some((cand, rc));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((cand, rc)) => {
                    x = cand;
                    r = rc;
                }
                None => return Err(ProblemError::InnerCap { iters, residual: r }),
            }
        }
        Ok(BlockSolution { value: x, inner_iters: iters })
    }

    /// Coordinatewise minimizer over the box of `⟨y, linear⟩ + D_φ(y, anchor)`.
    pub fn y_block_solve(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        let (lo, hi) = (self.params.lo, self.params.hi);
        let geom = req.geometry;
        let g_anchor = geom.grad(req.anchor)?;
        let y: Vector = (0..req.anchor.len())
            .map(|i| {
                let v = g_anchor[i] - req.linear[i];
                let stationary = match geom {
                    BregmanGeometry::Euclidean { mu } => Ok(v / mu),
                    BregmanGeometry::KullbackLeibler { mu, .. } => Ok((v / mu - 1.0).exp()),
                    BregmanGeometry::ItakuraSaito { mu, .. } => {
                        // For v ≥ 0 the 1-D objective decreases on (0, ∞).
                        Ok(if v < 0.0 { -mu / v } else { f64::INFINITY })
                    }
                    BregmanGeometry::Mahalanobis(_) => Err(ProblemError::Unsupported(
                        "box-constrained y-block with a non-separable geometry",
                    )),
                }?;
                Ok(stationary.clamp(lo, hi))
            })
            .collect::<Result<_, ProblemError>>()?;
        Ok(BlockSolution { value: y, inner_iters: 1 })
    }

    /// `(φ₁, φ₂)` of the given kinds, scale `μ`, with the box attached.
    pub fn geometries(&self, x: GeometryKind, y: GeometryKind) -> Result<Geometries, ProblemError> {
        let bx = self.operating_box();
        let make = |k| bregman::make_by_name(k, self.params.mu).map(|g| g.with_box(bx));
        Ok(Geometries::new(make(x)?, make(y)?))
    }

    pub fn in_box(&self, y: &[f64]) -> bool {
        y.iter().all(|&v| v >= self.params.lo && v <= self.params.hi)
    }
}

impl CoupledProblem for Qfp {
    fn x_dim(&self) -> usize {
        self.dim()
    }

    fn y_dim(&self) -> usize {
        self.dim()
    }

    fn f(&self, x: &[f64]) -> f64 {
        self.value(x).unwrap_or(f64::INFINITY)
    }

    fn g(&self, y: &[f64]) -> f64 {
        if self.in_box(y) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn coupling(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * self.params.gamma * linalg::dist_sq(x, y)
    }

    fn grad_x_coupling(&self, x: &[f64], y: &[f64]) -> Vector {
        x.iter().zip(y).map(|(a, b)| self.params.gamma * (a - b)).collect()
    }

    fn grad_y_coupling(&self, x: &[f64], y: &[f64]) -> Vector {
        x.iter().zip(y).map(|(a, b)| self.params.gamma * (b - a)).collect()
    }

    /// `f` stays inside the x-subproblem, so only `Q` is linearized and its
    /// block moduli are both γ.
    fn coupling_lipschitz(&self) -> Option<(f64, f64)> {
        Some((self.params.gamma, self.params.gamma))
    }

    fn solve_x(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        self.x_block_solve(req)
    }

    fn solve_y(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        self.y_block_solve(req)
    }
}
