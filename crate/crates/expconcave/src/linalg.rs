//! Dense vector and small symmetric-matrix helpers.
//!
//! Problem dimensions here are tiny (d <= 8 in practice), so everything is
//! plain `Vec<f64>` / row-major storage with no BLAS.

use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `a + s * b`
pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Symmetric matrix in row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    dim: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn eye(dim: usize, diag: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = diag;
        }
        m
    }

    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::invalid("matrix", format!("expected {} entries", dim * dim)));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let row = &self.data[i * self.dim..(i + 1) * self.dim];
                dot(row, v)
            })
            .collect()
    }

    /// `self += w * v vᵀ`
    pub fn add_outer(&mut self, v: &[f64], w: f64) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i * self.dim + j] += w * v[i] * v[j];
            }
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Gershgorin upper bound on the largest eigenvalue magnitude.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Cholesky factor (lower triangular) if the matrix is positive definite.
    pub fn cholesky(&self) -> Option<Vec<f64>> {
        let d = self.dim;
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Some(l)
    }

    /// Solve `self * x = b` via Cholesky. Fails on non-positive-definite input.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let l = self
            .cholesky()
            .ok_or_else(|| Error::invalid("matrix", "not positive definite".to_string()))?;
        let d = self.dim;
        // forward: L y = b
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * d + k] * y[k];
            }
            y[i] = s / l[i * d + i];
        }
        // backward: Lᵀ x = y
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in (i + 1)..d {
                s -= l[k * d + i] * x[k];
            }
            x[i] = s / l[i * d + i];
        }
        Ok(x)
    }

    /// Full inverse via Cholesky solves against basis vectors.
    pub fn inverse(&self) -> Result<SymMat> {
        let d = self.dim;
        let mut out = SymMat::zeros(d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..d {
                out.set(i, j, col[i]);
            }
            e[j] = 0.0;
        }
        Ok(out)
    }

    /// Check positive semidefiniteness up to a small diagonal jitter.
    pub fn is_psd(&self, tol: f64) -> bool {
        if !self.is_symmetric(tol.max(1e-9) * (1.0 + self.gershgorin_bound())) {
            return false;
        }
        let jitter = tol.max(1e-12) * (1.0 + self.trace().abs() / self.dim as f64);
        let mut m = self.clone();
        for i in 0..self.dim {
            let v = m.get(i, i) + jitter;
            m.set(i, i, v);
        }
        m.cholesky().is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solve_roundtrip() {
        let a = SymMat::from_rows(2, vec![4.0, 1.0, 1.0, 3.0]).unwrap();
        let x = a.solve(&[1.0, 2.0]).unwrap();
        let b = a.matvec(&x);
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!((b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_of_diag() {
        let a = SymMat::from_rows(2, vec![4.0, 0.0, 0.0, 2.0]).unwrap();
        let inv = a.inverse().unwrap();
        assert!((inv.get(0, 0) - 0.25).abs() < 1e-14);
        assert!((inv.get(1, 1) - 0.5).abs() < 1e-14);
        assert!(inv.get(0, 1).abs() < 1e-14);
    }

    #[test]
    fn psd_detects_indefinite() {
        let a = SymMat::from_rows(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(!a.is_psd(1e-12));
        let b = SymMat::from_rows(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        assert!(b.is_psd(1e-12));
    }

    #[test]
    fn outer_update_trace() {
        let mut a = SymMat::eye(2, 1.0);
        a.add_outer(&[1.0, 2.0], 1.0);
        assert!((a.trace() - (1.0 + 1.0 + 1.0 + 4.0)).abs() < 1e-14);
    }
}
