//! Symmetric positive definite matrices with a cached Cholesky factor.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

const SYMMETRY_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    /// Row-major entries.
    entries: Vec<f64>,
    /// Row-major lower-triangular factor.
    chol: Vec<f64>,
    diagonal: bool,
}

/// In-place-free Cholesky of a row-major `dim × dim` matrix. Pivots below
/// `1e-12 · max diag` are rejected.
pub fn cholesky(dim: usize, a: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), dim * dim);
    let max_diag = (0..dim).map(|i| a[i * dim + i]).fold(0.0f64, f64::max);
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return Err(Error::NotPositiveDefinite("non-positive diagonal".into()));
    }
    let tol = PIVOT_TOL * max_diag;
    let mut l = vec![0.0; dim * dim];
    for j in 0..dim {
        let mut s = a[j * dim + j];
        for k in 0..j {
            s -= l[j * dim + k] * l[j * dim + k];
        }
        if !(s > tol) {
            return Err(Error::NotPositiveDefinite(format!(
                "pivot {j} is {s:e} (tolerance {tol:e})"
            )));
        }
        let ljj = s.sqrt();
        l[j * dim + j] = ljj;
        for i in (j + 1)..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the row-major lower factor.
pub fn cholesky_solve(dim: usize, l: &[f64], b: &[f64], x: &mut [f64]) {
    for i in 0..dim {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * dim + k] * x[k];
        }
        x[i] = s / l[i * dim + i];
    }
    for i in (0..dim).rev() {
        let mut s = x[i];
        for k in (i + 1)..dim {
            s -= l[k * dim + i] * x[k];
        }
        x[i] = s / l[i * dim + i];
    }
}

pub fn cholesky_log_det(dim: usize, l: &[f64]) -> f64 {
    2.0 * (0..dim).map(|i| l[i * dim + i].ln()).sum::<f64>()
}

impl SpdMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite entry".into()));
        }
        let mut diagonal = true;
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (entries[i * dim + j], entries[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::NotPositiveDefinite(format!(
                        "asymmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                if a != 0.0 || b != 0.0 {
                    diagonal = false;
                }
            }
        }
        let chol = cholesky(dim, &entries)?;
        Ok(Self {
            dim,
            entries,
            chol,
            diagonal,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Self::new(dim, rows.concat())
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        let mut entries = vec![0.0; d * d];
        for (i, v) in diag.iter().enumerate() {
            entries[i * d + i] = *v;
        }
        Self::new(d, entries)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        Self::from_diagonal(&vec![scale; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn chol(&self) -> &[f64] {
        &self.chol
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.entry(i, i)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn log_det(&self) -> f64 {
        cholesky_log_det(self.dim, &self.chol)
    }

    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = super::dot(&self.entries[i * self.dim..(i + 1) * self.dim], v);
        }
    }

    /// `L v`, used to colour standard-normal draws.
    pub fn chol_mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..=i).map(|k| self.chol[i * self.dim + k] * v[k]).sum();
        }
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        cholesky_solve(self.dim, &self.chol, b, x);
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        if self.diagonal {
            return self.diagonal().into_iter().fold(0.0, f64::max);
        }
        self.to_dmatrix().symmetric_eigen().eigenvalues.max()
    }
}
