use std::fmt;
use std::str::FromStr;

use super::EngineError;

/// One inertial coefficient sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InertialSequence {
    Constant(f64),
    /// `(k − 1)/(k + 2)`, clamped at 0 for the first steps.
    Extrapolation,
}

impl InertialSequence {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            InertialSequence::Constant(c) => c,
            InertialSequence::Extrapolation => ((k as f64 - 1.0) / (k as f64 + 2.0)).max(0.0),
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            InertialSequence::Constant(c) => c,
            InertialSequence::Extrapolation => 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, InertialSequence::Constant(c) if *c == 0.0)
    }
}

impl Default for InertialSequence {
    fn default() -> Self {
        InertialSequence::Constant(0.0)
    }
}

impl fmt::Display for InertialSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InertialSequence::Constant(c) => write!(f, "{c}"),
            InertialSequence::Extrapolation => f.write_str("(k-1)/(k+2)"),
        }
    }
}

impl FromStr for InertialSequence {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t == "(k-1)/(k+2)" {
            return Ok(InertialSequence::Extrapolation);
        }
        match t.parse::<f64>() {
            Ok(c) if (0.0..=1.0).contains(&c) => Ok(InertialSequence::Constant(c)),
            _ => Err(EngineError::BadSequence(s.to_string())),
        }
    }
}

/// The four inertial sequences and the margin `ρ = min{θ₁ − L₁⁺, θ₂ − L₂⁺}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertialSchedule {
    pub alpha1: InertialSequence,
    pub alpha2: InertialSequence,
    pub beta1: InertialSequence,
    pub beta2: InertialSequence,
    pub rho: f64,
}

impl InertialSchedule {
    pub fn constant(alpha1: f64, alpha2: f64, beta1: f64, beta2: f64, rho: f64) -> Self {
        Self {
            alpha1: InertialSequence::Constant(alpha1),
            alpha2: InertialSequence::Constant(alpha2),
            beta1: InertialSequence::Constant(beta1),
            beta2: InertialSequence::Constant(beta2),
            rho,
        }
    }

    /// Same coefficients on both blocks.
    pub fn symmetric(first: f64, second: f64, rho: f64) -> Self {
        Self::constant(first, second, first, second, rho)
    }

    pub fn none(rho: f64) -> Self {
        Self::constant(0.0, 0.0, 0.0, 0.0, rho)
    }

    /// α₁ with `α₁ₖ, β₁ₖ ∈ [0, α₁]`.
    pub fn alpha1_bound(&self) -> f64 {
        self.alpha1.sup().max(self.beta1.sup())
    }

    /// α₂ with `α₂ₖ, β₂ₖ ∈ [0, α₂]`.
    pub fn alpha2_bound(&self) -> f64 {
        self.alpha2.sup().max(self.beta2.sup())
    }

    pub fn without_second_step(mut self) -> Self {
        self.alpha2 = InertialSequence::Constant(0.0);
        self.beta2 = InertialSequence::Constant(0.0);
        self
    }

    pub fn without_inertia(self) -> Self {
        Self::none(self.rho)
    }

    pub fn has_extrapolation(&self) -> bool {
        [self.alpha1, self.alpha2, self.beta1, self.beta2]
            .iter()
            .any(|s| matches!(s, InertialSequence::Extrapolation))
    }

    /// `(α₁ₖ, α₂ₖ, β₁ₖ, β₂ₖ)`.
    pub fn at(&self, k: usize) -> (f64, f64, f64, f64) {
        (self.alpha1.at(k), self.alpha2.at(k), self.beta1.at(k), self.beta2.at(k))
    }
}

/// Descent margin `a = (ρ − 2(α₁ + α₂))/2`, or the violated inequality.
pub fn validate_schedule(s: &InertialSchedule) -> Result<f64, EngineError> {
    if !(s.rho > 0.0) {
        return Err(EngineError::NonPositiveRho(s.rho));
    }
    let twice = 2.0 * (s.alpha1_bound() + s.alpha2_bound());
    if twice >= s.rho {
        return Err(EngineError::Inadmissible { lhs: twice, rho: s.rho });
    }
    Ok((s.rho - twice) / 2.0)
}
