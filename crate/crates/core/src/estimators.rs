//! Observation panels and their empirical covariance/correlation.

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::rng::stream_rng;

/// A complete `q × p` panel: one row per time point, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    names: Vec<String>,
    data: Array2<f64>,
}

impl ObservationMatrix {
    pub fn new(names: Vec<String>, data: Array2<f64>) -> Result<Self> {
        let (q, p) = data.dim();
        if q < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                available: q,
            });
        }
        if p < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 variables, got {p}")));
        }
        if names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: names.len(),
            });
        }
        let mut seen = HashSet::with_capacity(p);
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate variable name {n:?}")));
            }
        }
        if let Some(((t, i), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite observation at row {t}, column {i}"
            )));
        }
        Ok(Self { names, data })
    }

    /// Panel with generated names `x0, x1, …`.
    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        let names = default_names(data.ncols());
        Self::new(names, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged observation rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((q, p), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::from_array(data)
    }

    /// Number of observations (rows).
    pub fn q(&self) -> usize {
        self.data.nrows()
    }

    /// Number of variables (columns).
    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(self.names.clone(), self.data.select(Axis(0), rows))
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        Self::new(names, self.data.select(Axis(1), cols))
    }

    /// Centres every column and rescales it to unit variance (1/q convention).
    pub fn standardized(&self) -> Result<Self> {
        let q = self.q() as f64;
        let mut data = self.data.clone();
        for (i, mut col) in data.axis_iter_mut(Axis(1)).enumerate() {
            let mean = col.sum() / q;
            col.mapv_inplace(|x| x - mean);
            let var = col.iter().map(|x| x * x).sum::<f64>() / q;
            if is_degenerate_variance(var, self.data.column(i).iter().copied()) {
                return Err(Error::ZeroVariance { column: i });
            }
            let sd = var.sqrt();
            col.mapv_inplace(|x| x / sd);
        }
        Self::new(self.names.clone(), data)
    }
}

pub(crate) fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

fn is_degenerate_variance(var: f64, column: impl Iterator<Item = f64>) -> bool {
    let scale = column.fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = (f64::EPSILON * scale).powi(2) * 16.0;
    !(var > floor)
}

/// Empirical covariance Σ̂, correlation R̂, variances and means of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub cov: SymMatrix,
    pub corr: SymMatrix,
    pub variances: Vec<f64>,
    pub means: Vec<f64>,
    /// Number of observations behind the estimate, when known.
    pub n_obs: Option<usize>,
}

impl CovariancePair {
    /// Wraps a known covariance matrix, deriving the correlation from it.
    pub fn from_covariance(cov: SymMatrix, means: Vec<f64>) -> Result<Self> {
        let p = cov.dim();
        if means.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: means.len(),
            });
        }
        let variances = cov.diagonal();
        if let Some(i) = variances.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::ZeroVariance { column: i });
        }
        let corr = correlation_from(&cov, &variances);
        Ok(Self {
            cov,
            corr,
            variances,
            means,
            n_obs: None,
        })
    }

    pub fn p(&self) -> usize {
        self.cov.dim()
    }

    /// Restriction to a subset of variables, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            cov: self.cov.submatrix(idx),
            corr: self.corr.submatrix(idx),
            variances: idx.iter().map(|&i| self.variances[i]).collect(),
            means: idx.iter().map(|&i| self.means[i]).collect(),
            n_obs: self.n_obs,
        }
    }
}

fn correlation_from(cov: &SymMatrix, variances: &[f64]) -> SymMatrix {
    let p = cov.dim();
    let sd: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let mut corr = SymMatrix::zeros(p);
    for i in 0..p {
        corr.set(i, i, 1.0);
        for j in 0..i {
            let r = cov.get(i, j) / (sd[i] * sd[j]);
            corr.set(i, j, r.clamp(-1.0, 1.0));
        }
    }
    corr
}

/// Maximum-likelihood (denominator `q`) covariance and Pearson correlation.
pub fn estimate(obs: &ObservationMatrix) -> Result<CovariancePair> {
    let q = obs.q();
    let p = obs.p();
    let means = obs.data.mean_axis(Axis(0)).expect("q >= 2");
    let centered = &obs.data - &means;
    let gram = centered.t().dot(&centered);
    let qf = q as f64;

    let mut cov = SymMatrix::zeros(p);
    for i in 0..p {
        for j in 0..=i {
            cov.set(i, j, gram[[i, j]] / qf);
        }
    }
    let variances = cov.diagonal();
    for (i, &v) in variances.iter().enumerate() {
        if is_degenerate_variance(v, obs.data.column(i).iter().copied()) {
            return Err(Error::ZeroVariance { column: i });
        }
    }
    let corr = correlation_from(&cov, &variances);
    Ok(CovariancePair {
        cov,
        corr,
        variances,
        means: means.to_vec(),
        n_obs: Some(q),
    })
}

/// Seeded uniform permutation of the rows, applied to all columns alike.
///
/// Cross-sectional dependence survives; serial dependence does not.
pub fn shuffle_stationarize(obs: &ObservationMatrix, seed: u64) -> ObservationMatrix {
    let mut order: Vec<usize> = (0..obs.q()).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    ObservationMatrix {
        names: obs.names.clone(),
        data: obs.data.select(Axis(0), &order),
    }
}
