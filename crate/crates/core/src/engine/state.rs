use crate::linalg::{self, Vector};

/// Rolling window of block iterates.
///
/// `km1`, `km2`, `km3` hold `z_{k−1}`, `z_{k−2}`, `z_{k−3}`; before enough
/// steps exist they repeat `z_0`. The tilde slots carry the extrapolated
/// points of the Gauss–Seidel inertial variant and equal `z_k` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub x_k: Vector,
    pub x_km1: Vector,
    pub x_km2: Vector,
    pub x_km3: Vector,
    pub y_k: Vector,
    pub y_km1: Vector,
    pub y_km2: Vector,
    pub y_km3: Vector,
    pub x_tilde: Vector,
    pub y_tilde: Vector,
    pub iter: usize,
}

impl SolverState {
    pub fn new(x0: Vector, y0: Vector) -> Self {
        Self {
            x_km1: x0.clone(),
            x_km2: x0.clone(),
            x_km3: x0.clone(),
            x_tilde: x0.clone(),
            x_k: x0,
            y_km1: y0.clone(),
            y_km2: y0.clone(),
            y_km3: y0.clone(),
            y_tilde: y0.clone(),
            y_k: y0,
            iter: 0,
        }
    }

    /// Pushes `(x, y)` as the new `z_k`.
    pub fn shift(&mut self, x: Vector, y: Vector) {
        let x3 = std::mem::replace(&mut self.x_km2, std::mem::replace(&mut self.x_km1, std::mem::replace(&mut self.x_k, x)));
        self.x_km3 = x3;
        let y3 = std::mem::replace(&mut self.y_km2, std::mem::replace(&mut self.y_km1, std::mem::replace(&mut self.y_k, y)));
        self.y_km3 = y3;
        self.iter += 1;
    }

    /// `Δ_k = ‖z_k − z_{k−1}‖`.
    pub fn delta(&self) -> f64 {
        (linalg::dist_sq(&self.x_k, &self.x_km1) + linalg::dist_sq(&self.y_k, &self.y_km1)).sqrt()
    }

    /// `‖x_k − x_{k−1}‖ + ‖y_k − y_{k−1}‖`.
    pub fn step_length(&self) -> f64 {
        linalg::dist(&self.x_k, &self.x_km1) + linalg::dist(&self.y_k, &self.y_km1)
    }

    pub fn is_finite(&self) -> bool {
        linalg::all_finite(&self.x_k) && linalg::all_finite(&self.y_k)
    }
}
