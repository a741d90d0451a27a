//! Dense Cholesky factorization with diagonal jitter for correlation matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// First jitter added to the diagonal when the plain factorization fails.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-6;

/// Lower-triangular factor `L` of a symmetric positive-definite matrix, `L Lᵀ = R + jitter·I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    /// Factorizes `matrix`, retrying with diagonal jitter 1e-10, 2e-10, ... up to 1e-6.
    ///
    /// `name` is only used to label the error.
    pub fn new(matrix: &DMatrix<f64>, name: &str) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if let Some(lower) = factorize(matrix, 0.0) {
            return Ok(Self { lower, jitter: 0.0 });
        }
        let mut jitter = JITTER_START;
        while jitter <= JITTER_MAX * (1.0 + 1e-12) {
            if let Some(lower) = factorize(matrix, jitter) {
                log::debug!("factorized `{name}` with jitter {jitter:e}");
                return Ok(Self { lower, jitter });
            }
            jitter *= 2.0;
        }
        Err(Error::Singular {
            name: name.to_string(),
            max_jitter: JITTER_MAX,
        })
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// ln det(L Lᵀ).
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L y = rhs` by forward substitution.
    pub fn solve_lower(&self, rhs: &[f64]) -> DVector<f64> {
        let n = self.dim();
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let mut acc = rhs[i];
            for k in 0..i {
                acc -= self.lower[(i, k)] * y[k];
            }
            y[i] = acc / self.lower[(i, i)];
        }
        y
    }

    /// Computes `L w`, mapping independent standard normals to correlated ones.
    pub fn correlate(&self, w: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..=i).map(|k| self.lower[(i, k)] * w[k]).sum())
            .collect()
    }
}

fn factorize(matrix: &DMatrix<f64>, jitter: f64) -> Option<DMatrix<f64>> {
    let n = matrix.nrows();
    let max_diag = matrix
        .diagonal()
        .iter()
        .fold(0.0_f64, |m, &d| m.max(d.abs()))
        .max(f64::MIN_POSITIVE);
    // pivots at or below this level mean the matrix is numerically singular
    let floor = n as f64 * f64::EPSILON * max_diag;
    let mut lower = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = matrix[(j, j)] + jitter;
        for k in 0..j {
            pivot -= lower[(j, k)] * lower[(j, k)];
        }
        if !pivot.is_finite() || pivot <= floor {
            return None;
        }
        let diag = pivot.sqrt();
        lower[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut acc = matrix[(i, j)];
            for k in 0..j {
                acc -= lower[(i, k)] * lower[(j, k)];
            }
            lower[(i, j)] = acc / diag;
        }
    }
    Some(lower)
}
