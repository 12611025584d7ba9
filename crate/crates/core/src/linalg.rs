//! Dense symmetric positive-definite kernels.
//!
//! Every symmetric matrix is stored as a packed lower triangle in row-major
//! order, so entry `(i, j)` with `j <= i` lives at `i * (i + 1) / 2 + j`.
//! The kernels are sized for clique/separator blocks and for the desk-scale
//! dense baselines (a few hundred to a few thousand variables).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot tolerance used by the positive-definiteness check.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

/// Symmetric matrix in packed lower-triangle storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from full rows, rejecting asymmetric or non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidInput("matrix must have at least one row".into()));
        }
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite entry at ({i}, {j})")));
                }
                let t = rows[j][i];
                let scale = v.abs().max(t.abs()).max(1.0);
                if (v - t).abs() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
                if j <= i {
                    m.set(i, j, v);
                }
            }
        }
        Ok(m)
    }

    /// Builds a matrix from packed lower-triangle storage.
    pub fn from_packed(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * (dim + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: dim * (dim + 1) / 2,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed(i, j)] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed(i, j)] += v;
    }

    pub fn packed_data(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Principal sub-block on the given (not necessarily sorted) index list.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let mut m = SymMatrix::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().take(a + 1) {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "matvec dimension mismatch");
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            for (j, &a) in row.iter().enumerate() {
                out[i] += a * v[j];
                if j != i {
                    out[j] += a * v[i];
                }
            }
        }
        out
    }

    /// Frobenius inner product `sum_ij A_ij B_ij`.
    pub fn frobenius_dot(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..=i {
                let w = if i == j { 1.0 } else { 2.0 };
                s += w * self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(m: &SymMatrix) -> Result<Self> {
        let n = m.dim();
        let tol = PIVOT_TOLERANCE * m.max_diagonal();
        let mut l = m.data.clone();
        for j in 0..n {
            let rj = j * (j + 1) / 2;
            let mut d = l[rj + j];
            for k in 0..j {
                d -= l[rj + k] * l[rj + k];
            }
            if !(d > tol) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            l[rj + j] = djj;
            for i in j + 1..n {
                let ri = i * (i + 1) / 2;
                let mut s = l[ri + j];
                for k in 0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                l[ri + j] = s / djj;
            }
        }
        Ok(Self { dim: n, l })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `L_ij`; zero above the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.l[i * (i + 1) / 2 + j]
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.get(i, i).ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn forward_substitute(&self, b: &mut [f64]) {
        for i in 0..self.dim {
            let ri = i * (i + 1) / 2;
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[ri + k] * b[k];
            }
            b[i] = s / self.l[ri + i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_substitute(&self, y: &mut [f64]) {
        for i in (0..self.dim).rev() {
            let ri = i * (i + 1) / 2;
            y[i] /= self.l[ri + i];
            let xi = y[i];
            for k in 0..i {
                y[k] -= self.l[ri + k] * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim, "solve dimension mismatch");
        let mut x = b.to_vec();
        self.forward_substitute(&mut x);
        self.backward_substitute(&mut x);
        x
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim;
        let mut inv = SymMatrix::zeros(n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.forward_substitute(&mut col);
            self.backward_substitute(&mut col);
            for (i, &c) in col.iter().enumerate().skip(j) {
                inv.set(i, j, c);
            }
        }
        inv
    }
}

pub fn cholesky(m: &SymMatrix) -> Result<Cholesky> {
    Cholesky::factor(m)
}

/// `ln det m`, computed as twice the sum of log Cholesky pivots.
pub fn logdet(m: &SymMatrix) -> Result<f64> {
    Ok(Cholesky::factor(m)?.logdet())
}

pub fn invert_spd(m: &SymMatrix) -> Result<SymMatrix> {
    Ok(Cholesky::factor(m)?.inverse())
}

pub fn solve_spd(m: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: b.len(),
        });
    }
    Ok(Cholesky::factor(m)?.solve(b))
}
