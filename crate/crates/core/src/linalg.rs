//! Small dense linear algebra on symmetric matrices.
//!
//! The covariances handled here stay small (a few hundred rows at most), so a
//! plain row-major matrix with a hand-rolled Cholesky keeps the crate generic
//! over the scalar type without pulling in a full linear algebra stack.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..self.cols {
                    acc += self[(i, j)] * x[j];
                }
                acc
            })
            .collect()
    }

    /// Largest absolute asymmetry, for sanity checks.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Smallest eigenvalue of a symmetric matrix via cyclic Jacobi rotations.
    pub fn min_eigenvalue_symmetric(&self) -> T {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return T::zero();
        }
        let mut a = self.clone();
        let tol = T::of(1e-14) * a.frobenius();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a[(p, q)].abs());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= tol {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::of(2.0) * apq);
                    let t = {
                        let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                        sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut min = a[(0, 0)];
        for i in 1..n {
            min = min.min(a[(i, i)]);
        }
        min
    }

    fn frobenius(&self) -> T {
        let mut acc = T::zero();
        for v in &self.data {
            acc += *v * *v;
        }
        acc.sqrt()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Plain factorization; `None` if the matrix is not numerically positive
    /// definite.
    pub fn new(a: &Matrix<T>) -> Option<Self> {
        assert_eq!(a.rows(), a.cols());
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if sum <= T::zero() || !sum.is_finite() {
                        return None;
                    }
                    l[(i, i)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Some(Cholesky { l })
    }

    /// Factorization with one retry after adding `jitter` to the diagonal.
    pub fn with_jitter(a: &Matrix<T>, jitter: T) -> Result<Self> {
        if let Some(c) = Cholesky::new(a) {
            return Ok(c);
        }
        let n = a.rows();
        let mut bumped = a.clone();
        for i in 0..n {
            bumped[(i, i)] += jitter;
        }
        Cholesky::new(&bumped).ok_or_else(|| {
            Error::Numerical(format!(
                "covariance of size {n} is not positive definite even after jitter {jitter}"
            ))
        })
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let v = y[k];
                y[i] -= self.l[(i, k)] * v;
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let v = y[k];
                y[i] -= self.l[(k, i)] * v;
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// Solve `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(b.rows(), b.cols());
        let mut col = vec![T::zero(); b.rows()];
        for j in 0..b.cols() {
            for i in 0..b.rows() {
                col[i] = b[(i, j)];
            }
            let sol = self.solve(&col);
            for i in 0..b.rows() {
                out[(i, j)] = sol[i];
            }
        }
        out
    }
}

/// Eigenvalues and orthonormal eigenvectors of a symmetric 2x2 matrix,
/// as `((lambda1, v1), (lambda2, v2))`.
pub fn eig_sym2<T: Scalar>(m: [[T; 2]; 2]) -> ((T, [T; 2]), (T, [T; 2])) {
    let a = m[0][0];
    let b = (m[0][1] + m[1][0]) / T::of(2.0);
    let c = m[1][1];
    let mean = (a + c) / T::of(2.0);
    let half_diff = (a - c) / T::of(2.0);
    let radius = (half_diff * half_diff + b * b).sqrt();
    let l1 = mean + radius;
    let l2 = mean - radius;
    // Eigenvector for l1; fall back to the axis when the matrix is diagonal.
    let v1 = if b.abs() > T::epsilon() * (a.abs() + c.abs() + T::one()) {
        normalize2([l1 - c, b])
    } else if a >= c {
        [T::one(), T::zero()]
    } else {
        [T::zero(), T::one()]
    };
    let v2 = [-v1[1], v1[0]];
    ((l1, v1), (l2, v2))
}

fn normalize2<T: Scalar>(v: [T; 2]) -> [T; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

/// Symmetric PSD square root of a 2x2 covariance; negative eigenvalues from
/// roundoff are clamped to zero.
pub fn psd_sqrt2<T: Scalar>(m: [[T; 2]; 2]) -> [[T; 2]; 2] {
    let ((l1, v1), (l2, v2)) = eig_sym2(m);
    let s1 = l1.max(T::zero()).sqrt();
    let s2 = l2.max(T::zero()).sqrt();
    let mut out = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = s1 * v1[i] * v1[j] + s2 * v2[i] * v2[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solve_roundtrip() {
        // A = L L^T with a known well-conditioned 3x3.
        let a = Matrix::from_fn(3, 3, |i, j| {
            let base = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
            base[i][j]
        });
        let c = Cholesky::<f64>::new(&a).unwrap();
        let x = vec![1.0, -2.0, 3.0];
        let b = a.matvec(&x);
        let got = c.solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_fn(2, 2, |i, j| if i == j { -1.0 } else { 0.0 });
        assert!(Cholesky::<f64>::new(&a).is_none());
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        // Rank-one matrix, singular but PSD.
        let a = Matrix::from_fn(2, 2, |_, _| 1.0);
        let c = Cholesky::<f64>::with_jitter(&a, 1e-9).unwrap();
        assert!(c.factor()[(0, 0)] > 0.0);
    }

    #[test]
    fn eig_sym2_matches_trace_det() {
        let m = [[3.0_f64, 1.2], [1.2, 2.0]];
        let ((l1, _), (l2, _)) = eig_sym2(m);
        assert!((l1 + l2 - 5.0).abs() < 1e-12);
        assert!((l1 * l2 - (3.0 * 2.0 - 1.2 * 1.2)).abs() < 1e-12);
    }

    #[test]
    fn psd_sqrt2_squares_back() {
        let m = [[2.0, 0.7], [0.7, 1.0]];
        let s = psd_sqrt2(m);
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| s[i][k] * s[k][j]).sum();
                assert!((v - m[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn min_eigenvalue_on_known_matrix() {
        let a = Matrix::from_fn(2, 2, |i, j| if i == j { 2.0_f64 } else { 1.0 });
        let min = a.min_eigenvalue_symmetric();
        assert!((min - 1.0).abs() < 1e-10);
    }
}
