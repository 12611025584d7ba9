//! Sparse regression, forecasting and conditional covariance read off the
//! block structure of a fitted precision matrix.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::estimators::ObservationMatrix;
use crate::linalg::{self, Cholesky, SymMatrix};
use crate::precision::SparsePrecision;

/// Conditioning variables (`past`) and target variables (`future`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSplit {
    past: Vec<usize>,
    future: Vec<usize>,
}

impl BlockSplit {
    pub fn new(past: Vec<usize>, future: Vec<usize>, p: usize) -> Result<Self> {
        if past.is_empty() || future.is_empty() {
            return Err(Error::InvalidInput("both blocks of a split must be nonempty".into()));
        }
        let mut seen = vec![false; p];
        for &v in past.iter().chain(&future) {
            if v >= p {
                return Err(Error::InvalidInput(format!("variable {v} out of range (p = {p})")));
            }
            if seen[v] {
                return Err(Error::InvalidInput(format!("variable {v} appears twice in the split")));
            }
            seen[v] = true;
        }
        Ok(Self { past, future })
    }

    pub fn past(&self) -> &[usize] {
        &self.past
    }

    pub fn future(&self) -> &[usize] {
        &self.future
    }
}

/// Precision blocks `(J₂₂, J₂₁)` of the joint law of `(past, future)`.
///
/// When the split does not cover every variable, the remaining ones are
/// marginalised out first (Schur complement of `J` on them).
fn joint_blocks(model: &SparsePrecision, split: &BlockSplit) -> Result<(SymMatrix, Array2<f64>)> {
    let p = model.p();
    let mut used = vec![false; p];
    for &v in split.past.iter().chain(&split.future) {
        used[v] = true;
    }
    let rest: Vec<usize> = (0..p).filter(|&v| !used[v]).collect();
    let p2 = split.future.len();
    let p1 = split.past.len();

    let mut j22 = SymMatrix::zeros(p2);
    for (a, &i) in split.future.iter().enumerate() {
        for (b, &k) in split.future.iter().enumerate().take(a + 1) {
            j22.set(a, b, model.get(i, k));
        }
    }
    let mut j21 = Array2::<f64>::zeros((p2, p1));
    for (a, &i) in split.future.iter().enumerate() {
        for (b, &k) in split.past.iter().enumerate() {
            j21[[a, b]] = model.get(i, k);
        }
    }
    if rest.is_empty() {
        return Ok((j22, j21));
    }

    let jrr = model.to_dense().submatrix(&rest);
    let chol = linalg::cholesky(&jrr)?;
    let order: Vec<usize> = split.future.iter().chain(&split.past).copied().collect();
    // W = J_RR⁻¹ J_R,(future ∪ past)
    let cols: Vec<Vec<f64>> = order
        .iter()
        .map(|&u| chol.solve(&rest.iter().map(|&r| model.get(r, u)).collect::<Vec<_>>()))
        .collect();
    let cross = |u: usize, w: &Vec<f64>| -> f64 { rest.iter().zip(w).map(|(&r, x)| model.get(u, r) * x).sum() };
    for a in 0..p2 {
        for b in 0..=a {
            j22.add(a, b, -cross(split.future[a], &cols[b]));
        }
        for b in 0..p1 {
            j21[[a, b]] -= cross(split.future[a], &cols[p2 + b]);
        }
    }
    Ok((j22, j21))
}

/// Linear predictor `X₂ ≈ β X₁` with `β = −J₂₂⁻¹ J₂₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    /// `p₂ × p₁` coefficient matrix.
    pub beta: Array2<f64>,
    pub split: BlockSplit,
    pub j22: SymMatrix,
}

pub fn fit_regression(model: &SparsePrecision, split: &BlockSplit) -> Result<RegressionModel> {
    let (j22, j21) = joint_blocks(model, split)?;
    let chol = Cholesky::factor(&j22)?;
    let (p2, p1) = j21.dim();
    let mut beta = Array2::<f64>::zeros((p2, p1));
    for b in 0..p1 {
        let rhs: Vec<f64> = j21.column(b).iter().map(|x| -x).collect();
        let col = chol.solve(&rhs);
        beta.slice_mut(s![.., b]).assign(&ndarray::Array1::from(col));
    }
    Ok(RegressionModel {
        beta,
        split: split.clone(),
        j22,
    })
}

/// Conditional mean `μ₂ + β (x₁ − μ₁)` of the future block.
pub fn predict(reg: &RegressionModel, x1: &[f64], means: &[f64]) -> Result<Vec<f64>> {
    let (p2, p1) = reg.beta.dim();
    if x1.len() != p1 {
        return Err(Error::DimensionMismatch {
            expected: p1,
            found: x1.len(),
        });
    }
    let need = reg.split.past.iter().chain(&reg.split.future).max().map_or(0, |m| m + 1);
    if means.len() < need {
        return Err(Error::DimensionMismatch {
            expected: need,
            found: means.len(),
        });
    }
    let dev: Vec<f64> = reg.split.past.iter().zip(x1).map(|(&i, &x)| x - means[i]).collect();
    Ok((0..p2)
        .map(|a| {
            let shift: f64 = reg.beta.row(a).iter().zip(&dev).map(|(b, d)| b * d).sum();
            means[reg.split.future[a]] + shift
        })
        .collect())
}

/// `Cov(X₂ | X₁) = J₂₂⁻¹`.
pub fn conditional_covariance(model: &SparsePrecision, split: &BlockSplit) -> Result<SymMatrix> {
    let (j22, _) = joint_blocks(model, split)?;
    linalg::invert_spd(&j22)
}

/// `ln det Cov(X₂ | own) − ln det Cov(X₂ | own ∪ other)`.
///
/// Nonnegative; zero when `other` carries no extra information about the
/// target once `own` is known.
pub fn conditional_information_gain(
    model: &SparsePrecision,
    target: &[usize],
    own: &[usize],
    other: &[usize],
) -> Result<f64> {
    let p = model.p();
    let base = BlockSplit::new(own.to_vec(), target.to_vec(), p)?;
    let full = BlockSplit::new(own.iter().chain(other).copied().collect(), target.to_vec(), p)?;
    let (j_base, _) = joint_blocks(model, &base)?;
    let (j_full, _) = joint_blocks(model, &full)?;
    Ok(linalg::logdet(&j_full)? - linalg::logdet(&j_base)?)
}

/// Side-by-side panel of each series at `t` and at `t + lag`.
///
/// Columns `0..p` are the past block and `p..2p` the future block.
pub fn lagged_panel(obs: &ObservationMatrix, lag: usize) -> Result<ObservationMatrix> {
    let (q, p) = obs.data().dim();
    if lag == 0 || q < lag + 2 {
        return Err(Error::InsufficientData {
            needed: lag.max(1) + 2,
            available: q,
        });
    }
    let n = q - lag;
    let mut data = Array2::<f64>::zeros((n, 2 * p));
    data.slice_mut(s![.., ..p]).assign(&obs.data().slice(s![..n, ..]));
    data.slice_mut(s![.., p..]).assign(&obs.data().slice(s![lag.., ..]));
    let names = obs
        .names()
        .iter()
        .cloned()
        .chain(obs.names().iter().map(|n| format!("{n}@+{lag}")))
        .collect();
    ObservationMatrix::new(names, data)
}
