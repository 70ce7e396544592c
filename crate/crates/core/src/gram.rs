//! Hermitian Gram matrices assembled from entrywise integrals.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{FqheError, Result};
use crate::integration::{Backend, IntegrationResult};

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub matrix: DMatrix<Complex64>,
    /// Largest entrywise error estimate.
    pub error_estimate: f64,
    /// Standard error of each entry (grid: nested-rule difference).
    pub entry_errors: DMatrix<f64>,
    pub evaluations: u64,
    pub backend: Backend,
}

impl GramMatrix {
    /// Row-major `size × size` results, conjugate-symmetrized.
    pub fn from_results(size: usize, results: &[IntegrationResult]) -> Self {
        let raw = DMatrix::from_fn(size, size, |p, q| results[p * size + q].value);
        let errs = DMatrix::from_fn(size, size, |p, q| {
            results[p * size + q].error_estimate.max(results[q * size + p].error_estimate)
        });
        let matrix = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
        Self {
            matrix,
            error_estimate: errs.max(),
            entry_errors: errs,
            evaluations: results.first().map_or(0, |r| r.evaluations),
            backend: results.first().map_or(Backend::Grid, |r| r.backend),
        }
    }

    pub fn from_matrix(matrix: DMatrix<Complex64>, backend: Backend) -> Self {
        let n = matrix.nrows();
        Self { matrix, error_estimate: 0.0, entry_errors: DMatrix::zeros(n, n), evaluations: 0, backend }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn off_diagonal_max(&self) -> f64 {
        let n = self.size();
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    worst = worst.max(self.matrix[(p, q)].norm());
                }
            }
        }
        worst
    }

    pub fn diagonal_mean(&self) -> f64 {
        let d = self.diagonal();
        d.iter().sum::<f64>() / d.len() as f64
    }

    /// `max(off-diagonal, diagonal spread) / mean diagonal`: zero exactly
    /// for scalar matrices.
    pub fn scalar_residual(&self) -> f64 {
        let d = self.diagonal();
        let mean = self.diagonal_mean();
        let spread = d.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
        self.off_diagonal_max().max(spread) / mean.abs()
    }

    /// Largest `|C_pq - value·δ_pq|`.
    pub fn max_deviation_from_scalar(&self, value: f64) -> f64 {
        let n = self.size();
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                let target = if p == q { value } else { 0.0 };
                worst = worst.max((self.matrix[(p, q)] - target).norm());
            }
        }
        worst
    }

    /// Fails unless the matrix is hermitian positive definite.
    pub fn check_positive_definite(&self) -> Result<()> {
        let min = self.matrix.clone().symmetric_eigenvalues().min();
        if !(min > 0.0) {
            return Err(FqheError::NotPositiveDefinite(format!("Gram matrix has smallest eigenvalue {min:e}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(v: Complex64, e: f64) -> IntegrationResult {
        IntegrationResult { value: v, error_estimate: e, evaluations: 10, backend: Backend::Grid, error_reliable: true }
    }

    #[test]
    fn symmetrizes_and_measures() {
        let c = Complex64::new;
        let r = [res(c(2.0, 1e-9), 1e-3), res(c(0.1, 0.2), 0.0), res(c(0.1, -0.2), 2e-3), res(c(2.0, 0.0), 0.0)];
        let g = GramMatrix::from_results(2, &r);
        assert_eq!(g.matrix[(0, 0)], c(2.0, 0.0));
        assert_eq!(g.matrix[(0, 1)], g.matrix[(1, 0)].conj());
        assert_eq!(g.error_estimate, 2e-3);
        assert!((g.off_diagonal_max() - c(0.1, 0.2).norm()).abs() < 1e-15);
        assert!((g.scalar_residual() - c(0.1, 0.2).norm() / 2.0).abs() < 1e-15);
        assert!(g.check_positive_definite().is_ok());
        let bad = GramMatrix::from_matrix(DMatrix::from_diagonal_element(2, 2, c(-1.0, 0.0)), Backend::Grid);
        assert!(bad.check_positive_definite().is_err());
    }
}
