//! Sparse signal recovery with an L½ penalty, split into two blocks:
//!
//! `min ½‖Ax − b‖² + (γ/2)‖x − y‖² + η‖y‖_{1/2}^{1/2}`
//!
//! The x-geometry `φ₁(x) = ½⟨x, (μI − AᵀA)x⟩` cancels the curvature of the
//! data term so the x-step is explicit; the y-step is a half-shrinkage.

use std::sync::{Arc, Mutex};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::bregman::{self, BregmanGeometry, GeometryKind};
use crate::engine::{
    inertial_drift, BlockRequest, BlockSolution, CoupledProblem, Geometries, InertialSchedule,
    ProblemError, SolverState,
};
use crate::linalg::{self, Cholesky, Matrix, Vector};
use crate::prox;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigrecParams {
    pub gamma: f64,
    /// Scale of the x-geometry.
    pub mu: f64,
    /// Scale of the Euclidean y-geometry.
    pub lambda: f64,
    /// `η = eta_factor · ‖Aᵀb‖∞`.
    pub eta_factor: f64,
}

impl Default for SigrecParams {
    fn default() -> Self {
        Self { gamma: 0.2, mu: 2.0, lambda: 1.5, eta_factor: 1e-3 }
    }
}

/// How a synthetic instance is drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigrecSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub noisy: bool,
    /// Fraction of nonzeros in the ground truth.
    pub sparsity: f64,
    /// Standard deviation of the additive noise.
    pub noise_std: f64,
}

impl SigrecSpec {
    pub fn new(n: usize, m: usize, seed: u64, noisy: bool) -> Self {
        Self { n, m, seed, noisy, sparsity: 0.05, noise_std: 1e-3f64.sqrt() }
    }
}

#[derive(Debug)]
pub struct SignalRecovery {
    a: Matrix,
    b: Vector,
    atb: Vector,
    eta: f64,
    params: SigrecParams,
    norm_a_sq: f64,
    x_geometry: BregmanGeometry,
    truth: Option<Vector>,
    // (shift, factor of shift·I + AAᵀ) for the Euclidean x-geometry path.
    woodbury: Mutex<Vec<(u64, Arc<Cholesky>)>>,
}

impl SignalRecovery {
    /// Builds the problem with `η = eta_factor·‖Aᵀb‖∞`.
    pub fn new(a: Matrix, b: Vector, params: SigrecParams) -> Result<Self, ProblemError> {
        if b.len() != a.rows() {
            return Err(ProblemError::Invalid(format!(
                "b has length {}, A has {} rows",
                b.len(),
                a.rows()
            )));
        }
        if !a.is_finite() || !linalg::all_finite(&b) {
            return Err(ProblemError::Invalid("A and b must be finite".into()));
        }
        if !(params.gamma >= 0.0 && params.lambda > 0.0 && params.eta_factor > 0.0) {
            return Err(ProblemError::Invalid(format!("bad parameters {params:?}")));
        }
        let atb = a.tmatvec(&b);
        let eta = params.eta_factor * linalg::norm_inf(&atb);
        if !(eta > 0.0) {
            return Err(ProblemError::Invalid("eta must be positive (is Aᵀb zero?)".into()));
        }
        let norm_a_sq = linalg::spectral_norm_sq(&a, 1e-14, 100_000)?;
        if params.mu <= norm_a_sq {
            return Err(ProblemError::Invalid(format!(
                "mu = {} must exceed ‖A‖² = {norm_a_sq} for μI − AᵀA to be positive definite",
                params.mu
            )));
        }
        let x_geometry = bregman::make_mahalanobis_shifted_gram(
            &a,
            0.5,
            params.mu,
            0.5 * (params.mu - norm_a_sq),
            0.5 * params.mu,
        )?;
        Ok(Self {
            a,
            b,
            atb,
            eta,
            params,
            norm_a_sq,
            x_geometry,
            truth: None,
            woodbury: Mutex::new(Vec::new()),
        })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn params(&self) -> &SigrecParams {
        &self.params
    }

    pub fn norm_a_sq(&self) -> f64 {
        self.norm_a_sq
    }

    /// Ground truth used to synthesize `b`, when known.
    pub fn truth(&self) -> Option<&[f64]> {
        self.truth.as_deref()
    }

    /// `½‖·‖²_{μI − AᵀA}` as a Mahalanobis kernel.
    pub fn x_geometry(&self) -> &BregmanGeometry {
        &self.x_geometry
    }

    pub fn y_geometry(&self) -> BregmanGeometry {
        BregmanGeometry::Euclidean { mu: self.params.lambda }
    }

    pub fn geometries(&self) -> Geometries {
        Geometries::new(self.x_geometry.clone(), self.y_geometry())
    }

    /// Euclidean pair `(μ/2)‖·‖²`, `(λ/2)‖·‖²` for the PALM reductions.
    pub fn euclidean_geometries(&self) -> Geometries {
        Geometries::new(
            BregmanGeometry::Euclidean { mu: self.params.mu },
            BregmanGeometry::Euclidean { mu: self.params.lambda },
        )
    }

    /// `ρ = min{μ − ‖A‖² − γ, λ − γ}`.
    pub fn rho(&self) -> f64 {
        (self.params.mu - self.norm_a_sq - self.params.gamma).min(self.params.lambda - self.params.gamma)
    }

    pub fn zero_start(&self) -> (Vector, Vector) {
        (vec![0.0; self.a.cols()], vec![0.0; self.a.cols()])
    }

    fn is_native(&self, g: &BregmanGeometry) -> bool {
        match (g.mahalanobis_form(), self.x_geometry.mahalanobis_form()) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    fn woodbury_factor(&self, shift: f64) -> Result<Arc<Cholesky>, ProblemError> {
        let key = shift.to_bits();
        let mut cache = self.woodbury.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((_, c)) = cache.iter().find(|(k, _)| *k == key) {
            return Ok(c.clone());
        }
        let aat = self.a.transpose().gram().add_identity(shift);
        let c = Arc::new(Cholesky::factor(&aat)?);
        cache.push((key, c.clone()));
        Ok(c)
    }

    /// `(AᵀA + s·I)⁻¹ r` through the n×n system `(s·I + AAᵀ)`.
    fn solve_shifted_gram(&self, shift: f64, r: &[f64]) -> Result<Vector, ProblemError> {
        let c = self.woodbury_factor(shift)?;
        let w = c.solve(&self.a.matvec(r));
        let corr = self.a.tmatvec(&w);
        Ok(r.iter().zip(&corr).map(|(ri, ci)| (ri - ci) / shift).collect())
    }

    /// Minimizer of `½‖Ax − b‖² + (κ/2)‖x‖² − ⟨x, rhs_extra⟩ + D_φ(x, anchor)`
    /// where `κ` is 0 or γ (exact coupling).
    fn x_solve(&self, req: &BlockRequest<'_>, kappa: f64) -> Result<Vector, ProblemError> {
        let a = req.anchor;
        // rhs without the geometry term: Aᵀb − linear (+ γ·other when exact)
        let mut rhs = self.atb.clone();
        linalg::axpy(-1.0, req.linear, &mut rhs);
        if kappa > 0.0 {
            linalg::axpy(kappa, req.other, &mut rhs);
        }
        let g = req.geometry;
        if self.is_native(g) {
            // (μ + κ)x = μa − AᵀAa + rhs
            let mu = self.params.mu;
            let ata_a = self.a.tmatvec(&self.a.matvec(a));
            return Ok((0..a.len()).map(|i| (mu * a[i] - ata_a[i] + rhs[i]) / (mu + kappa)).collect());
        }
        match g {
            BregmanGeometry::Euclidean { mu } => {
                linalg::axpy(*mu, a, &mut rhs);
                self.solve_shifted_gram(mu + kappa, &rhs)
            }
            BregmanGeometry::Mahalanobis(form) => {
                let two_m = form.matrix().scaled(2.0);
                linalg::axpy(1.0, &two_m.matvec(a), &mut rhs);
                let lhs = self.a.gram().add(&two_m).add_identity(kappa);
                Ok(Cholesky::factor(&lhs)?.solve(&rhs))
            }
            _ => Err(ProblemError::Unsupported("signal recovery x-block with an entropy geometry")),
        }
    }

    fn y_solve(&self, req: &BlockRequest<'_>, kappa: f64) -> Result<Vector, ProblemError> {
        let lam = match req.geometry {
            BregmanGeometry::Euclidean { mu } => *mu,
            _ => return Err(ProblemError::Unsupported("signal recovery y-block needs a euclid geometry")),
        };
        let denom = lam + kappa;
        let arg: Vector = (0..req.anchor.len())
            .map(|i| (lam * req.anchor[i] + kappa * req.other[i] - req.linear[i]) / denom)
            .collect();
        Ok(prox::half_shrinkage(&arg, self.eta / denom).expect("eta > 0"))
    }
}

impl CoupledProblem for SignalRecovery {
    fn x_dim(&self) -> usize {
        self.a.cols()
    }

    fn y_dim(&self) -> usize {
        self.a.cols()
    }

    fn f(&self, x: &[f64]) -> f64 {
        let mut r = self.a.matvec(x);
        linalg::axpy(-1.0, &self.b, &mut r);
        0.5 * linalg::norm_sq(&r)
    }

    fn g(&self, y: &[f64]) -> f64 {
        self.eta * y.iter().map(|v| v.abs().sqrt()).sum::<f64>()
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

    fn coupling_lipschitz(&self) -> Option<(f64, f64)> {
        Some((self.params.gamma, self.params.gamma))
    }

    fn solve_x(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        self.x_solve(req, 0.0).map(BlockSolution::closed_form)
    }

    fn solve_y(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        self.y_solve(req, 0.0).map(BlockSolution::closed_form)
    }

    fn supports_exact(&self) -> bool {
        true
    }

    fn solve_x_exact(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        self.x_solve(req, self.params.gamma).map(BlockSolution::closed_form)
    }

    fn solve_y_exact(&self, req: &BlockRequest<'_>) -> Result<BlockSolution, ProblemError> {
        self.y_solve(req, self.params.gamma).map(BlockSolution::closed_form)
    }
}

/// Draws `A` (Gaussian, rescaled to ‖A‖ ≤ 1), a sparse ground truth and `b`.
///
/// Three independent ChaCha8 streams of `seed` drive `A`, the ground truth
/// and the noise, so toggling noise leaves `A` and the truth unchanged.
pub fn sigrec_make(spec: &SigrecSpec, params: SigrecParams) -> Result<SignalRecovery, ProblemError> {
    let SigrecSpec { n, m, seed, noisy, sparsity, noise_std } = *spec;
    if n == 0 || n >= m {
        return Err(ProblemError::Invalid(format!("need 0 < n < m, got n = {n}, m = {m}")));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(ProblemError::Invalid(format!("sparsity must lie in (0, 1], got {sparsity}")));
    }
    let a = linalg::normalize_for_contraction(&linalg::gaussian_matrix(n, m, seed)?)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let nnz = ((sparsity * m as f64).ceil() as usize).clamp(1, m);
    let mut truth = vec![0.0; m];
    let mut support: Vec<usize> = sample(&mut rng, m, nnz).into_vec();
    support.sort_unstable();
    for i in support {
        truth[i] = StandardNormal.sample(&mut rng);
    }

    let mut b = a.matvec(&truth);
    if noisy {
        let mut nrng = ChaCha8Rng::seed_from_u64(seed);
        nrng.set_stream(2);
        let noise = Normal::new(0.0, noise_std)
            .map_err(|e| ProblemError::Invalid(format!("noise: {e}")))?;
        for v in &mut b {
            *v += noise.sample(&mut nrng);
        }
    }
    let mut p = SignalRecovery::new(a, b, params)?;
    p.truth = Some(truth);
    Ok(p)
}

/// Explicit x-update written out directly:
/// `x⁺ = (1/μ)[μx_k − AᵀAx_k + Aᵀb − γ(x_k − y_k) + α₁(x_k − x_{k−1}) + α₂(x_{k−1} − x_{k−2})]`.
pub fn sigrec_x_update(p: &SignalRecovery, s: &SolverState, sched: &InertialSchedule) -> Vector {
    let (a1, a2, _, _) = sched.at(s.iter);
    let mu = p.params.mu;
    let gamma = p.params.gamma;
    let ata = p.a.tmatvec(&p.a.matvec(&s.x_k));
    (0..s.x_k.len())
        .map(|i| {
            (mu * s.x_k[i] - ata[i] + p.atb[i] - gamma * (s.x_k[i] - s.y_k[i])
                + a1 * (s.x_k[i] - s.x_km1[i])
                + a2 * (s.x_km1[i] - s.x_km2[i]))
                / mu
        })
        .collect()
}

/// Explicit y-update:
/// `y⁺ = H(y_k + (1/λ)[γ(x⁺ − y_k) + β₁(y_k − y_{k−1}) + β₂(y_{k−1} − y_{k−2})], η/λ)`.
pub fn sigrec_y_update(
    p: &SignalRecovery,
    x_next: &[f64],
    s: &SolverState,
    sched: &InertialSchedule,
) -> Vector {
    let (_, _, b1, b2) = sched.at(s.iter);
    let lam = p.params.lambda;
    let drift = inertial_drift(b1, b2, &s.y_k, &s.y_km1, &s.y_km2);
    let arg: Vector = (0..s.y_k.len())
        .map(|i| s.y_k[i] + (p.params.gamma * (x_next[i] - s.y_k[i]) - drift[i]) / lam)
        .collect();
    prox::half_shrinkage(&arg, p.eta / lam).expect("eta > 0")
}

/// Which built-in geometry a sigrec x-block uses, for configuration.
pub fn sigrec_x_geometry(p: &SignalRecovery, kind: GeometryKind) -> Result<BregmanGeometry, ProblemError> {
    match kind {
        GeometryKind::Mahalanobis => Ok(p.x_geometry.clone()),
        GeometryKind::Euclidean => Ok(BregmanGeometry::Euclidean { mu: p.params.mu }),
        _ => Err(ProblemError::Unsupported("signal recovery x-block with an entropy geometry")),
    }
}
