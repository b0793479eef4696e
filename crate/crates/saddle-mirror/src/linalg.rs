//! Dense row-major matrices and the small direct solvers the problem layer
//! needs: Gaussian elimination, Jacobi eigendecomposition, and LDLᵀ-based
//! definiteness tests. Everything here targets the tiny systems that arise
//! from saddle problems and cone projections; nothing is blocked or tuned
//! for scale.

use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::Error;
use crate::math;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from nested rows; rejects empty or ragged input and
    /// non-finite entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, Error> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Validation(
                "matrix must have at least one row and one column".into(),
            ));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Validation(alloc::format!(
                    "ragged matrix: row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::Validation("matrix entries must be finite".into()));
                }
                data.push(v);
            }
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// A·v.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                math::dot(row, v)
            })
            .collect()
    }

    /// Aᵀ·v.
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (j, &a) in row.iter().enumerate() {
                out[j] += a * v[i];
            }
        }
        out
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Largest absolute entry (0 for the empty case, which cannot occur).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| if math::abs(v) > m { math::abs(v) } else { m })
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if math::abs(self.get(i, j) - self.get(j, i)) > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Positive-semidefiniteness test by LDLᵀ elimination without pivoting.
    /// A zero pivot is accepted only when its whole remaining row vanishes
    /// (the null-space case); a negative pivot or a nonzero row under a zero
    /// pivot witnesses an indefinite direction.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        if !self.is_symmetric(rel_tol * (1.0 + self.max_abs())) {
            return false;
        }
        let n = self.rows;
        let mut a = self.clone();
        let scale = 1.0 + self.max_abs();
        let tol = rel_tol * scale;
        for k in 0..n {
            let pivot = a.get(k, k);
            if pivot < -tol {
                return false;
            }
            if pivot <= tol {
                for j in (k + 1)..n {
                    if math::abs(a.get(k, j)) > tol {
                        return false;
                    }
                }
                continue;
            }
            for i in (k + 1)..n {
                let f = a.get(i, k) / pivot;
                for j in k..n {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
        true
    }

    /// Strict positive-definiteness: LDLᵀ with every pivot above tolerance.
    pub fn is_pd(&self, rel_tol: f64) -> bool {
        if !self.is_symmetric(rel_tol * (1.0 + self.max_abs())) {
            return false;
        }
        let n = self.rows;
        let mut a = self.clone();
        let tol = rel_tol * (1.0 + self.max_abs());
        for k in 0..n {
            let pivot = a.get(k, k);
            if pivot <= tol {
                return false;
            }
            for i in (k + 1)..n {
                let f = a.get(i, k) / pivot;
                for j in k..n {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
        true
    }
}

/// Solves A z = b by Gaussian elimination with partial pivoting. Returns
/// `None` when A is singular at working precision.
pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return None;
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let tol = 1e-12 * (1.0 + m.max_abs());
    for k in 0..n {
        let mut p = k;
        for i in (k + 1)..n {
            if math::abs(m.get(i, k)) > math::abs(m.get(p, k)) {
                p = i;
            }
        }
        if math::abs(m.get(p, k)) <= tol {
            return None;
        }
        if p != k {
            for j in 0..n {
                let tmp = m.get(k, j);
                m.set(k, j, m.get(p, j));
                m.set(p, j, tmp);
            }
            rhs.swap(k, p);
        }
        for i in (k + 1)..n {
            let f = m.get(i, k) / m.get(k, k);
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                let v = m.get(i, j) - f * m.get(k, j);
                m.set(i, j, v);
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut z = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..n {
            s -= m.get(k, j) * z[j];
        }
        z[k] = s / m.get(k, k);
    }
    Some(z)
}

/// Jacobi eigendecomposition of a symmetric matrix: returns eigenvalues and
/// eigenvectors (as columns) with A = V·diag(λ)·Vᵀ.
pub fn sym_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    assert_eq!(a.cols(), n, "sym_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let tol = 1e-14 * (1.0 + a.max_abs());
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += math::abs(m.get(i, j));
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if math::abs(apq) <= tol * 1e-2 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // Stable tangent of the rotation angle.
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + math::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let evals = (0..n).map(|i| m.get(i, i)).collect();
    (evals, v)
}
