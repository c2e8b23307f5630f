//! Closed-form proximal maps and projections.

use thiserror::Error;

use crate::linalg::Vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error("shrinkage weight must be positive and finite, got {0}")]
    BadKappa(f64),
    #[error("sparsity fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("empty box [{lo}, {hi}]")]
    BadBox { lo: f64, hi: f64 },
}

/// Magnitudes at or below this map to zero under [`half_shrinkage`].
///
/// `t ↦ κ√|t| + ½(t − a)²` has a nonzero global minimizer exactly when
/// `|a| > (3/2)·κ^{2/3}`; at equality zero ties with it and zero is returned.
pub fn half_threshold(kappa: f64) -> f64 {
    1.5 * kappa.powf(2.0 / 3.0)
}

/// Half-shrinkage of a single coordinate. Assumes `kappa > 0`.
pub fn half_shrink_scalar(a: f64, kappa: f64) -> f64 {
    let r = a.abs();
    if r <= half_threshold(kappa) {
        return 0.0;
    }
    // Largest root of the depressed cubic from the stationarity condition
    // t − a + κ/(2√t) = 0 in the variable √t.
    let arg = (kappa / 4.0) * (r / 3.0).powf(-1.5);
    let phi = arg.clamp(-1.0, 1.0).acos();
    let t = (2.0 * r / 3.0) * (1.0 + (2.0 * std::f64::consts::PI / 3.0 - 2.0 * phi / 3.0).cos());
    t.copysign(a)
}

/// Elementwise global minimizer of `κ|t|^{1/2} + ½(t − aᵢ)²`.
pub fn half_shrinkage(a: &[f64], kappa: f64) -> Result<Vector, ProxError> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(ProxError::BadKappa(kappa));
    }
    Ok(a.iter().map(|&v| half_shrink_scalar(v, kappa)).collect())
}

pub fn project_box(v: &[f64], lo: f64, hi: f64) -> Result<Vector, ProxError> {
    if !(lo <= hi) {
        return Err(ProxError::BadBox { lo, hi });
    }
    Ok(v.iter().map(|x| x.clamp(lo, hi)).collect())
}

pub fn project_nonneg(v: &[f64]) -> Vector {
    v.iter().map(|&x| x.max(0.0)).collect()
}

pub fn project_nonneg_in_place(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// Per-column ℓ0 budget: at most `ceil(fraction · len)` nonzeros.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsityBudget {
    fraction: f64,
}

impl SparsityBudget {
    pub fn new(fraction: f64) -> Result<Self, ProxError> {
        if fraction > 0.0 && fraction <= 1.0 {
            Ok(Self { fraction })
        } else {
            Err(ProxError::BadFraction(fraction))
        }
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn count(&self, len: usize) -> usize {
        // Guard against 0.25 * 60 landing a hair above 15.
        let raw = self.fraction * len as f64;
        let k = (raw - 1e-9 * raw.max(1.0)).ceil() as usize;
        k.clamp(1, len.max(1))
    }
}

/// Projection onto `{v ≥ 0, ‖v‖₀ ≤ k}`: positive part, then keep the `k`
/// largest entries. Ties go to the lowest index.
pub fn project_sparse_nonneg(col: &[f64], budget: SparsityBudget) -> Vector {
    let mut out = project_nonneg(col);
    let k = budget.count(col.len());
    if k >= out.len() {
        return out;
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    // Stable sort keeps lower indices first among equal values.
    order.sort_by(|&i, &j| out[j].total_cmp(&out[i]));
    for &i in &order[k..] {
        out[i] = 0.0;
    }
    out
}
