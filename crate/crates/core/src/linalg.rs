//! Minimal dense Cholesky machinery for kernel matrices.
//!
//! Kernel systems here stay small (at most a few hundred points), so a
//! hand-rolled factorization keeps full control over the jitter ladder and
//! the append-one-row extension that makes fantasized posteriors cheap.

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// stored row-major with the strict upper triangle unused.
#[derive(Debug, Clone)]
pub(crate) struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    /// Factor a symmetric matrix given row-major. Returns `None` if any pivot
    /// is non-positive or non-finite.
    pub fn decompose(a: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return None;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Some(CholeskyFactor { n, l })
    }

    /// Solve `L x = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let mut sum = x[i];
            for (k, &lik) in row.iter().enumerate() {
                sum -= lik * x[k];
            }
            x[i] = sum / self.l[i * n + i];
        }
        x
    }

    /// Solve `L^T x = b` by back substitution.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in i + 1..n {
                sum -= self.l[k * n + i] * x[k];
            }
            x[i] = sum / self.l[i * n + i];
        }
        x
    }

    /// Solve `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// Extend the factor by one trailing row/column of the underlying matrix,
    /// given the cross-covariances against the existing points and the new
    /// diagonal entry. Fails when the Schur pivot is not strictly positive.
    pub fn extend(&self, cross: &[f64], diag: f64) -> Option<Self> {
        debug_assert_eq!(cross.len(), self.n);
        let n = self.n;
        let w = self.solve_lower(cross);
        let pivot_sq = diag - w.iter().map(|v| v * v).sum::<f64>();
        if !(pivot_sq > 0.0) || !pivot_sq.is_finite() {
            return None;
        }
        let m = n + 1;
        let mut l = vec![0.0; m * m];
        for i in 0..n {
            l[i * m..i * m + i + 1].copy_from_slice(&self.l[i * n..i * n + i + 1]);
        }
        l[n * m..n * m + n].copy_from_slice(&w);
        l[n * m + n] = pivot_sq.sqrt();
        Some(CholeskyFactor { n: m, l })
    }

    /// `sum_i ln L_ii`, i.e. half the log-determinant of the matrix.
    pub fn log_det_half(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum()
    }
}
