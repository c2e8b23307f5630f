//! Bregman geometries and the distance `D_φ(x, y) = φ(x) − φ(y) − ⟨∇φ(y), x − y⟩`.
//!
//! Four kernels are provided:
//!
//! | name          | φ(x)               | ∇φ(x)          | (∇φ)⁻¹(v)        |
//! |---------------|--------------------|----------------|------------------|
//! | `euclid`      | (μ/2)‖x‖²          | μx             | v/μ              |
//! | `kl`          | μ Σ xᵢ ln xᵢ       | μ(1 + ln xᵢ)   | exp(vᵢ/μ − 1)    |
//! | `is`          | −μ Σ ln xᵢ         | −μ/xᵢ          | −μ/vᵢ (vᵢ < 0)   |
//! | `mahalanobis` | ⟨x, Mx⟩            | 2Mx            | (2M)⁻¹v          |
//!
//! The entropy kernels are only strongly convex on bounded boxes, so their
//! modulus θ is computed from an [`OperatingBox`] rather than stored.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{self, Cholesky, LinalgError, Matrix, Vector};

/// Entries of KL/IS arguments must exceed this.
pub const DOMAIN_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BregmanError {
    #[error("{geometry} domain violated at coordinate {index}: value {value:e}")]
    Domain { geometry: &'static str, index: usize, value: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error("invalid operating box [{lo}, {hi}]")]
    BadBox { lo: f64, hi: f64 },
    #[error("Mahalanobis matrix must be symmetric")]
    NotSymmetric,
    #[error("Mahalanobis matrix rejected: {0}")]
    Matrix(#[from] LinalgError),
    #[error("unknown geometry {0:?} (expected euclid, kl, is or mahalanobis)")]
    UnknownName(String),
}

/// Compact box `[lo, hi]ᵐ` on which strong convexity and gradient
/// Lipschitz constants of the entropy kernels are evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingBox {
    pub lo: f64,
    pub hi: f64,
}

impl OperatingBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self, BregmanError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(BregmanError::BadBox { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v >= self.lo && v <= self.hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    Euclidean,
    KullbackLeibler,
    ItakuraSaito,
    Mahalanobis,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::Euclidean => "euclid",
            GeometryKind::KullbackLeibler => "kl",
            GeometryKind::ItakuraSaito => "is",
            GeometryKind::Mahalanobis => "mahalanobis",
        }
    }

    /// Index used in the `Alg(ij)` labels: 1 = KL, 2 = IS, 3 = Euclidean.
    pub fn table_index(self) -> Option<u8> {
        match self {
            GeometryKind::KullbackLeibler => Some(1),
            GeometryKind::ItakuraSaito => Some(2),
            GeometryKind::Euclidean => Some(3),
            GeometryKind::Mahalanobis => None,
        }
    }

    pub fn from_table_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(GeometryKind::KullbackLeibler),
            2 => Some(GeometryKind::ItakuraSaito),
            3 => Some(GeometryKind::Euclidean),
            _ => None,
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeometryKind {
    type Err = BregmanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclid" => Ok(GeometryKind::Euclidean),
            "kl" => Ok(GeometryKind::KullbackLeibler),
            "is" => Ok(GeometryKind::ItakuraSaito),
            "mahalanobis" => Ok(GeometryKind::Mahalanobis),
            other => Err(BregmanError::UnknownName(other.to_string())),
        }
    }
}

/// Quadratic kernel `φ(x) = ⟨x, Mx⟩` with its factorization and spectrum bounds.
#[derive(Debug)]
pub struct MahalanobisForm {
    matrix: Matrix,
    twice: Cholesky,
    min_eig: f64,
    max_eig: f64,
    /// `(s, c, F)` when `matrix = s·(c·I − FᵀF)`; products then cost two
    /// passes over `F` instead of one over the square matrix.
    shifted_gram: Option<(f64, f64, Matrix)>,
}

impl MahalanobisForm {
    /// `M·x`.
    pub fn apply(&self, x: &[f64]) -> Vector {
        match &self.shifted_gram {
            Some((s, c, f)) => {
                let mut out = f.tmatvec(&f.matvec(x));
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = s * (c * xi - *o);
                }
                out
            }
            None => self.matrix.matvec(x),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }

    pub fn max_eig(&self) -> f64 {
        self.max_eig
    }
}

#[derive(Clone, Debug)]
pub enum BregmanGeometry {
    Euclidean { mu: f64 },
    KullbackLeibler { mu: f64, bounds: Option<OperatingBox> },
    ItakuraSaito { mu: f64, bounds: Option<OperatingBox> },
    Mahalanobis(Arc<MahalanobisForm>),
}

fn check_scale(mu: f64) -> Result<(), BregmanError> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(BregmanError::BadScale(mu))
    }
}

pub fn make_euclidean(mu: f64) -> Result<BregmanGeometry, BregmanError> {
    check_scale(mu)?;
    Ok(BregmanGeometry::Euclidean { mu })
}

pub fn make_kl(mu: f64) -> Result<BregmanGeometry, BregmanError> {
    check_scale(mu)?;
    Ok(BregmanGeometry::KullbackLeibler { mu, bounds: None })
}

pub fn make_itakura_saito(mu: f64) -> Result<BregmanGeometry, BregmanError> {
    check_scale(mu)?;
    Ok(BregmanGeometry::ItakuraSaito { mu, bounds: None })
}

/// Mahalanobis kernel for a symmetric positive definite `m`.
///
/// The extreme eigenvalues are estimated by power iteration on `m` and on
/// `λ_max·I − m`.
pub fn make_mahalanobis(m: &Matrix) -> Result<BregmanGeometry, BregmanError> {
    if !m.is_symmetric(1e-12) {
        return Err(BregmanError::NotSymmetric);
    }
    // Factor first so indefinite input fails with the pivot diagnostic.
    Cholesky::factor(m)?;
    let max_eig = linalg::spectral_norm_sq(m, 1e-14, 100_000)?.sqrt();
    let shifted = m.scaled(-1.0).add_identity(max_eig);
    let gap = if shifted.is_zero() {
        0.0
    } else {
        linalg::spectral_norm_sq(&shifted, 1e-14, 100_000)?.sqrt()
    };
    make_mahalanobis_with_spectrum(m, (max_eig - gap).max(0.0), max_eig)
}

/// Mahalanobis kernel whose extreme eigenvalues are already known.
pub fn make_mahalanobis_with_spectrum(
    m: &Matrix,
    min_eig: f64,
    max_eig: f64,
) -> Result<BregmanGeometry, BregmanError> {
    if !m.is_symmetric(1e-12) {
        return Err(BregmanError::NotSymmetric);
    }
    let twice = Cholesky::factor(&m.scaled(2.0))?;
    Ok(BregmanGeometry::Mahalanobis(Arc::new(MahalanobisForm {
        matrix: m.clone(),
        twice,
        min_eig,
        max_eig,
        shifted_gram: None,
    })))
}

/// Kernel with `M = s·(c·I − FᵀF)` and known extreme eigenvalues.
pub fn make_mahalanobis_shifted_gram(
    f: &Matrix,
    s: f64,
    c: f64,
    min_eig: f64,
    max_eig: f64,
) -> Result<BregmanGeometry, BregmanError> {
    let m = f.gram().scaled(-s).add_identity(s * c);
    let twice = Cholesky::factor(&m.scaled(2.0))?;
    Ok(BregmanGeometry::Mahalanobis(Arc::new(MahalanobisForm {
        matrix: m,
        twice,
        min_eig,
        max_eig,
        shifted_gram: Some((s, c, f.clone())),
    })))
}

/// Builds a geometry by CLI/config name. Mahalanobis needs a matrix and is
/// not constructible here.
pub fn make_by_name(kind: GeometryKind, mu: f64) -> Result<BregmanGeometry, BregmanError> {
    match kind {
        GeometryKind::Euclidean => make_euclidean(mu),
        GeometryKind::KullbackLeibler => make_kl(mu),
        GeometryKind::ItakuraSaito => make_itakura_saito(mu),
        GeometryKind::Mahalanobis => Err(BregmanError::UnknownName(
            "mahalanobis requires a matrix".to_string(),
        )),
    }
}

impl BregmanGeometry {
    pub fn kind(&self) -> GeometryKind {
        match self {
            BregmanGeometry::Euclidean { .. } => GeometryKind::Euclidean,
            BregmanGeometry::KullbackLeibler { .. } => GeometryKind::KullbackLeibler,
            BregmanGeometry::ItakuraSaito { .. } => GeometryKind::ItakuraSaito,
            BregmanGeometry::Mahalanobis(_) => GeometryKind::Mahalanobis,
        }
    }

    /// Declares the operating box used by [`theta`](Self::theta) and
    /// [`grad_lipschitz`](Self::grad_lipschitz). No effect on Euclidean or
    /// Mahalanobis kernels.
    pub fn with_box(self, bounds: OperatingBox) -> Self {
        match self {
            BregmanGeometry::KullbackLeibler { mu, .. } => {
                BregmanGeometry::KullbackLeibler { mu, bounds: Some(bounds) }
            }
            BregmanGeometry::ItakuraSaito { mu, .. } => {
                BregmanGeometry::ItakuraSaito { mu, bounds: Some(bounds) }
            }
            other => other,
        }
    }

    pub fn mahalanobis_form(&self) -> Option<&Arc<MahalanobisForm>> {
        match self {
            BregmanGeometry::Mahalanobis(form) => Some(form),
            _ => None,
        }
    }

    pub fn operating_box(&self) -> Option<OperatingBox> {
        match self {
            BregmanGeometry::KullbackLeibler { bounds, .. }
            | BregmanGeometry::ItakuraSaito { bounds, .. } => *bounds,
            _ => None,
        }
    }

    /// Strong-convexity modulus on `bounds`.
    ///
    /// KL: `μ/hi` (from (t ln t)'' = 1/t). IS: `μ/hi²` (from (−ln t)'' = 1/t²).
    pub fn theta_on(&self, bounds: &OperatingBox) -> f64 {
        match self {
            BregmanGeometry::Euclidean { mu } => *mu,
            BregmanGeometry::KullbackLeibler { mu, .. } => mu / bounds.hi,
            BregmanGeometry::ItakuraSaito { mu, .. } => mu / (bounds.hi * bounds.hi),
            BregmanGeometry::Mahalanobis(form) => 2.0 * form.min_eig,
        }
    }

    /// Strong-convexity modulus on the declared box; 0 for KL/IS without one.
    pub fn theta(&self) -> f64 {
        match (self, self.operating_box()) {
            (BregmanGeometry::KullbackLeibler { .. } | BregmanGeometry::ItakuraSaito { .. }, None) => 0.0,
            (_, Some(b)) => self.theta_on(&b),
            (_, None) => self.theta_on(&OperatingBox { lo: 0.0, hi: 1.0 }),
        }
    }

    /// Lipschitz constant of ∇φ, `None` when unbounded (entropy kernels
    /// without a box, or a box touching zero).
    pub fn grad_lipschitz(&self) -> Option<f64> {
        match self {
            BregmanGeometry::Euclidean { mu } => Some(*mu),
            BregmanGeometry::Mahalanobis(form) => Some(2.0 * form.max_eig),
            BregmanGeometry::KullbackLeibler { mu, bounds } => {
                bounds.filter(|b| b.lo > 0.0).map(|b| mu / b.lo)
            }
            BregmanGeometry::ItakuraSaito { mu, bounds } => {
                bounds.filter(|b| b.lo > 0.0).map(|b| mu / (b.lo * b.lo))
            }
        }
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<(), BregmanError> {
        let name = self.kind().name();
        match self {
            BregmanGeometry::KullbackLeibler { .. } | BregmanGeometry::ItakuraSaito { .. } => {
                if let Some((index, &value)) =
                    x.iter().enumerate().find(|(_, &v)| !(v > DOMAIN_FLOOR && v.is_finite()))
                {
                    return Err(BregmanError::Domain { geometry: name, index, value });
                }
            }
            BregmanGeometry::Mahalanobis(form) => {
                if x.len() != form.matrix.rows() {
                    return Err(BregmanError::Dimension(x.len(), form.matrix.rows()));
                }
                if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                    return Err(BregmanError::Domain { geometry: name, index, value });
                }
            }
            BregmanGeometry::Euclidean { .. } => {
                if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                    return Err(BregmanError::Domain { geometry: name, index, value });
                }
            }
        }
        Ok(())
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.check_domain(x).is_ok()
    }

    pub fn phi(&self, x: &[f64]) -> Result<f64, BregmanError> {
        self.check_domain(x)?;
        Ok(match self {
            BregmanGeometry::Euclidean { mu } => 0.5 * mu * linalg::norm_sq(x),
            BregmanGeometry::KullbackLeibler { mu, .. } => mu * x.iter().map(|v| v * v.ln()).sum::<f64>(),
            BregmanGeometry::ItakuraSaito { mu, .. } => -mu * x.iter().map(|v| v.ln()).sum::<f64>(),
            BregmanGeometry::Mahalanobis(form) => linalg::dot(x, &form.apply(x)),
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vector, BregmanError> {
        self.check_domain(x)?;
        Ok(match self {
            BregmanGeometry::Euclidean { mu } => linalg::scale(x, *mu),
            BregmanGeometry::KullbackLeibler { mu, .. } => x.iter().map(|v| mu * (1.0 + v.ln())).collect(),
            BregmanGeometry::ItakuraSaito { mu, .. } => x.iter().map(|v| -mu / v).collect(),
            BregmanGeometry::Mahalanobis(form) => linalg::scale(&form.apply(x), 2.0),
        })
    }

    /// `∇φ(u) − ∇φ(v)`; a single product for the quadratic kernels.
    pub fn grad_difference(&self, u: &[f64], v: &[f64]) -> Result<Vector, BregmanError> {
        match self {
            BregmanGeometry::Euclidean { mu } => {
                same_len(u, v)?;
                Ok(u.iter().zip(v).map(|(a, b)| mu * (a - b)).collect())
            }
            BregmanGeometry::Mahalanobis(form) => {
                self.check_domain(u)?;
                self.check_domain(v)?;
                Ok(linalg::scale(&form.apply(&linalg::sub(u, v)), 2.0))
            }
            _ => Ok(linalg::sub(&self.grad(u)?, &self.grad(v)?)),
        }
    }

    /// Inverse of ∇φ on its range. For IS every `vᵢ` must be negative.
    pub fn inv_grad(&self, v: &[f64]) -> Result<Vector, BregmanError> {
        let name = self.kind().name();
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(BregmanError::Domain { geometry: name, index, value });
        }
        let out: Vector = match self {
            BregmanGeometry::Euclidean { mu } => linalg::scale(v, 1.0 / mu),
            BregmanGeometry::KullbackLeibler { mu, .. } => v.iter().map(|t| (t / mu - 1.0).exp()).collect(),
            BregmanGeometry::ItakuraSaito { mu, .. } => {
                if let Some((index, &value)) = v.iter().enumerate().find(|(_, &t)| t >= 0.0) {
                    return Err(BregmanError::Domain { geometry: name, index, value });
                }
                v.iter().map(|t| -mu / t).collect()
            }
            BregmanGeometry::Mahalanobis(form) => {
                if v.len() != form.matrix.rows() {
                    return Err(BregmanError::Dimension(v.len(), form.matrix.rows()));
                }
                form.twice.solve(v)
            }
        };
        // exp underflow can leave the KL range; report it rather than clamp.
        self.check_domain(&out)?;
        Ok(out)
    }

    /// `D_φ(x, y)` via the closed form of each kernel.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64, BregmanError> {
        bregman_distance(self, x, y)
    }
}

fn same_len(x: &[f64], y: &[f64]) -> Result<(), BregmanError> {
    if x.len() == y.len() {
        Ok(())
    } else {
        Err(BregmanError::Dimension(x.len(), y.len()))
    }
}

/// `D_φ(x, y)`, evaluated through each kernel's closed form:
/// `(μ/2)‖x−y‖²`, `μ Σ (xᵢ ln(xᵢ/yᵢ) + yᵢ − xᵢ)`, `μ Σ (xᵢ/yᵢ − ln(xᵢ/yᵢ) − 1)`,
/// `‖x − y‖²_M`.
pub fn bregman_distance(geom: &BregmanGeometry, x: &[f64], y: &[f64]) -> Result<f64, BregmanError> {
    same_len(x, y)?;
    geom.check_domain(x)?;
    geom.check_domain(y)?;
    Ok(match geom {
        BregmanGeometry::Euclidean { mu } => 0.5 * mu * linalg::dist_sq(x, y),
        BregmanGeometry::KullbackLeibler { mu, .. } => {
            mu * x.iter().zip(y).map(|(a, b)| a * (a / b).ln() + b - a).sum::<f64>()
        }
        BregmanGeometry::ItakuraSaito { mu, .. } => {
            mu * x
                .iter()
                .zip(y)
                .map(|(a, b)| {
                    let r = a / b;
                    r - r.ln() - 1.0
                })
                .sum::<f64>()
        }
        BregmanGeometry::Mahalanobis(form) => {
            let d = linalg::sub(x, y);
            linalg::dot(&d, &form.apply(&d))
        }
    })
}

/// `φ(x) − φ(y) − ⟨∇φ(y), x − y⟩` straight from the definition.
pub fn bregman_distance_generic(
    geom: &BregmanGeometry,
    x: &[f64],
    y: &[f64],
) -> Result<f64, BregmanError> {
    same_len(x, y)?;
    let gy = geom.grad(y)?;
    Ok(geom.phi(x)? - geom.phi(y)? - linalg::dot(&gy, &linalg::sub(x, y)))
}
