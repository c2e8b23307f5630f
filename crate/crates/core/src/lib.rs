//! Two-step inertial Bregman proximal alternating linearized minimization
//! for `min f(x) + Q(x, y) + g(y)`, with its one-step, non-inertial and
//! Euclidean reductions, the iPALM/GiPALM/TiBAM baselines, and three
//! benchmark problem families.

pub mod bregman;
pub mod engine;
pub mod linalg;
pub mod problems;
pub mod prox;
