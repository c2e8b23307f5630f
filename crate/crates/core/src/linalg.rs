//! Dense vectors and matrices, spectral estimation, seeded Gaussian draws.
//!
//! Matrices are row-major `f64` buffers. Every reduction (dot products,
//! matrix-vector products) sums in a fixed index order, so the parallel and
//! sequential code paths produce bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

mod io;

pub use io::{format_matrix, load_matrix, parse_matrix, save_matrix, MatrixIoError};

/// A block iterate. Plain `Vec<f64>`; the helpers below treat it as a point in ℝᵐ.
pub type Vector = Vec<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("entry count {len} does not match shape {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("matrix is zero")]
    ZeroMatrix,
    #[error("matrix is not symmetric positive definite (Cholesky pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// How data-parallel kernels are scheduled.
///
/// `Parallel` silently degrades to `Sequential` when the crate is built
/// without the `parallel` feature. Both produce identical bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    /// Parallel when the feature is on and the pool has more than one thread.
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        if rayon::current_num_threads() > 1 {
            return Execution::Parallel;
        }
        Execution::Sequential
    }
}

/// Below this many entries a matrix-vector product is not worth fanning out.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows * cols != data.len() {
            return Err(LinalgError::ShapeMismatch { rows, cols, len: data.len() });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
                value: data[idx],
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        norm_sq(&self.data)
    }

    /// `M v` with the default execution policy.
    pub fn matvec(&self, v: &[f64]) -> Vector {
        self.matvec_with(v, Execution::default())
    }

    pub fn matvec_with(&self, v: &[f64], exec: Execution) -> Vector {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        let row_dot = |row: &[f64]| dot(row, v);
        if use_parallel(exec, self.data.len()) {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                return self.data.par_chunks(self.cols.max(1)).map(row_dot).collect();
            }
        }
        if self.cols == 0 {
            return vec![0.0; self.rows];
        }
        self.data.chunks(self.cols).map(row_dot).collect()
    }

    /// `Mᵀ w`.
    pub fn tmatvec(&self, w: &[f64]) -> Vector {
        self.tmatvec_with(w, Execution::default())
    }

    pub fn tmatvec_with(&self, w: &[f64], exec: Execution) -> Vector {
        assert_eq!(w.len(), self.rows, "tmatvec dimension mismatch");
        // Column j accumulates over rows in increasing order on both paths,
        // one contiguous row segment at a time.
        let cols = self.cols;
        let block = |lo: usize, out: &mut [f64]| {
            let hi = lo + out.len();
            for (i, wi) in w.iter().enumerate() {
                let row = &self.data[i * cols + lo..i * cols + hi];
                for (o, a) in out.iter_mut().zip(row) {
                    *o += a * wi;
                }
            }
        };
        let mut out = vec![0.0; cols];
        if use_parallel(exec, self.data.len()) {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                const COL_BLOCK: usize = 64;
                out.par_chunks_mut(COL_BLOCK)
                    .enumerate()
                    .for_each(|(b, chunk)| block(b * COL_BLOCK, chunk));
                return out;
            }
        }
        block(0, &mut out);
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(n, m);
        for i in 0..n {
            let orow = &mut out.data[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * m..(p + 1) * m];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `MᵀM`.
    pub fn gram(&self) -> Matrix {
        self.transpose().matmul(self)
    }

    /// `M + s·I` for square `M`.
    pub fn add_identity(&self, s: f64) -> Matrix {
        assert_eq!(self.rows, self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            out.data[i * self.cols + i] += s;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape());
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape());
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetric_part(&self) -> Matrix {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
            }
        }
        out
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        (0..n).all(|i| {
            (0..i).all(|j| (self.data[i * n + j] - self.data[j * n + i]).abs() <= rel_tol * scale)
        })
    }
}

#[inline]
fn use_parallel(exec: Execution, work: usize) -> bool {
    cfg!(feature = "parallel") && exec == Execution::Parallel && work >= PAR_THRESHOLD
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent partial sums let the loop pipeline.
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vector {
    a.iter().map(|x| x * s).collect()
}

/// `y += s·x`.
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Power-iteration settings for [`spectral_norm_sq`].
#[derive(Clone, Copy, Debug)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

/// Largest eigenvalue of `MᵀM` (the squared operator 2-norm of `M`).
///
/// Power iteration on `MᵀM` from the all-ones vector; stops once the
/// Rayleigh quotient changes by at most `tol` relative, or after `max_iter`
/// sweeps. The estimate approaches the true value from below.
pub fn spectral_norm_sq(m: &Matrix, tol: f64, max_iter: usize) -> Result<f64, LinalgError> {
    if m.rows == 0 || m.cols == 0 {
        return Err(LinalgError::Empty);
    }
    if !(tol > 0.0) {
        return Err(LinalgError::BadTolerance(tol));
    }
    if let Some(idx) = m.data.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite {
            row: idx / m.cols,
            col: idx % m.cols,
            value: m.data[idx],
        });
    }
    if m.is_zero() {
        return Ok(0.0);
    }

    let mut v = vec![1.0 / (m.cols as f64).sqrt(); m.cols];
    let mut estimate = 0.0;
    for it in 0..max_iter.max(1) {
        let mv = m.matvec(&v);
        let rayleigh = norm_sq(&mv);
        let mut w = m.tmatvec(&mv);
        let wn = norm(&w);
        if wn == 0.0 {
            // Start vector in the null space; fall back to a coordinate sweep.
            if it == 0 {
                return Ok(coordinate_fallback(m, tol, max_iter));
            }
            return Ok(rayleigh);
        }
        w.iter_mut().for_each(|x| *x /= wn);
        v = w;
        if it > 0 && (rayleigh - estimate).abs() <= tol * rayleigh.abs() {
            estimate = rayleigh;
            break;
        }
        estimate = rayleigh;
    }
    Ok(estimate.max(0.0))
}

fn coordinate_fallback(m: &Matrix, tol: f64, max_iter: usize) -> f64 {
    // The all-ones start can be orthogonal to every right singular vector
    // with a nonzero value; restart from the column of largest norm.
    let t = m.transpose();
    let best = (0..m.cols)
        .max_by(|&a, &b| norm_sq(t.row(a)).total_cmp(&norm_sq(t.row(b))))
        .unwrap_or(0);
    let mut v = vec![0.0; m.cols];
    v[best] = 1.0;
    let mut estimate = 0.0;
    for it in 0..max_iter.max(1) {
        let mv = m.matvec(&v);
        let rayleigh = norm_sq(&mv);
        let mut w = m.tmatvec(&mv);
        let wn = norm(&w);
        if wn == 0.0 {
            return rayleigh;
        }
        w.iter_mut().for_each(|x| *x /= wn);
        v = w;
        if it > 0 && (rayleigh - estimate).abs() <= tol * rayleigh {
            return rayleigh;
        }
        estimate = rayleigh;
    }
    estimate
}

/// [`spectral_norm_sq`] with the default settings (`tol = 1e-10`, 10 000 sweeps).
pub fn spectral_norm_sq_default(m: &Matrix) -> Result<f64, LinalgError> {
    let p = PowerIteration::default();
    spectral_norm_sq(m, p.tol, p.max_iter)
}

/// `rows × cols` matrix of i.i.d. standard normal entries.
///
/// The generator is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64(seed)`)
/// feeding the ziggurat sampler of `rand_distr::StandardNormal`; entries
/// are drawn in row-major order. Same `(rows, cols, seed)`, same matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Result<Matrix, LinalgError> {
    if rows == 0 || cols == 0 {
        return Err(LinalgError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(Matrix { rows, cols, data })
}

/// Scales `a` so that its operator 2-norm is at most one.
///
/// Matrices that are already contractive are returned unchanged. Otherwise
/// the result is `a / ‖a‖` where `‖a‖` comes from a tight power iteration
/// nudged up by 1e-10 relative, since the iteration approaches from below.
pub fn normalize_for_contraction(a: &Matrix) -> Result<Matrix, LinalgError> {
    if a.is_zero() {
        return Err(LinalgError::ZeroMatrix);
    }
    let s = spectral_norm_sq(a, 1e-14, 100_000)?;
    if s <= 1.0 {
        return Ok(a.clone());
    }
    Ok(a.scaled(1.0 / (s * (1.0 + 1e-10)).sqrt()))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(m: &Matrix) -> Result<Self, LinalgError> {
        if m.rows != m.cols {
            return Err(LinalgError::DimensionMismatch { expected: m.rows, got: m.cols });
        }
        let n = m.rows;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = m.data[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = m.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Vector {
        let n = self.n;
        assert_eq!(b.len(), n);
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }
}
