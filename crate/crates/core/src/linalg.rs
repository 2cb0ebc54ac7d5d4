//! Dense Hermitian positive-definite factorization for small complex systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Lower Cholesky factor `L` with `R = L L^H`, row-major `n x n`.
///
/// Only the lower triangle of the input is read. The strict upper triangle of
/// the factor is left untouched and must not be relied on.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    factor: Vec<Complex64>,
}

impl Cholesky {
    /// Factor `matrix` in place (takes ownership of the buffer).
    pub fn factor(mut matrix: Vec<Complex64>, n: usize) -> Result<Self> {
        assert_eq!(matrix.len(), n * n, "matrix buffer must be n*n");
        for j in 0..n {
            let row_j = j * n;
            let mut d = matrix[row_j + j].re;
            for k in 0..j {
                d -= matrix[row_j + k].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = d.sqrt();
            matrix[row_j + j] = Complex64::new(d, 0.0);
            let inv = 1.0 / d;
            for i in j + 1..n {
                let row_i = i * n;
                let mut acc = matrix[row_i + j];
                for k in 0..j {
                    acc -= matrix[row_i + k] * matrix[row_j + k].conj();
                }
                matrix[row_i + j] = acc * inv;
            }
        }
        Ok(Self { n, factor: matrix })
    }

    /// Hands the storage back for reuse.
    pub fn into_buffer(self) -> Vec<Complex64> {
        self.factor
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `L z = b` in place.
    pub fn forward_solve(&self, b: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.factor[i * n..i * n + i + 1];
            let mut acc = b[i];
            for k in 0..i {
                acc -= row[k] * b[k];
            }
            b[i] = acc / row[i].re;
        }
    }

    /// Solve `L^H x = z` in place.
    pub fn backward_solve(&self, z: &mut [Complex64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in i + 1..n {
                acc -= self.factor[k * n + i].conj() * z[k];
            }
            z[i] = acc / self.factor[i * n + i].re;
        }
    }

    /// Solve `R x = b` in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        self.forward_solve(b);
        self.backward_solve(b);
    }
}
