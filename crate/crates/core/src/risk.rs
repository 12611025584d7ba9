//! Conditioning on hard linear constraints (P/L allocation, stress
//! scenarios) and clique/separator-wise evaluation of the precision matrix.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::CovariancePair;
use crate::ifn::CliqueTree;
use crate::linalg::{self, SymMatrix};
use crate::precision::{tree_blocks, LocalBlock, SparsePrecision};

/// `A X = z` with `A` of shape `k × p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    a: Array2<f64>,
    z: Vec<f64>,
}

impl LinearConstraint {
    pub fn new(a: Array2<f64>, z: Vec<f64>) -> Result<Self> {
        let (k, _) = a.dim();
        if k == 0 {
            return Err(Error::InvalidInput("a constraint needs at least one row".into()));
        }
        if z.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: z.len(),
            });
        }
        if a.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("constraint has non-finite values".into()));
        }
        Ok(Self { a, z })
    }

    pub fn from_rows(rows: &[Vec<f64>], z: Vec<f64>) -> Result<Self> {
        let k = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("constraint rows must be nonempty and equal length".into()));
        }
        let a = Array2::from_shape_vec((k, p), rows.concat()).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(a, z)
    }

    /// Single portfolio constraint `wᵀ X = loss`.
    pub fn portfolio(weights: &[f64], loss: f64) -> Result<Self> {
        Self::from_rows(&[weights.to_vec()], vec![loss])
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        match serde_json::from_str::<ScenarioSpec>(s)? {
            ScenarioSpec::General { a, z } => Self::from_rows(&a, z),
            ScenarioSpec::Portfolio { weights, loss } => Self::portfolio(&weights, loss),
        }
    }
}

/// Scenario file: `{"A": [[…]], "z": […]}` or `{"weights": […], "loss": L}`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    General {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        z: Vec<f64>,
    },
    Portfolio {
        weights: Vec<f64>,
        loss: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub cond_mean: Vec<f64>,
    pub cond_cov: Vec<Vec<f64>>,
}

/// Shared pieces of the Lagrange solution: `V = Σ Aᵀ` and `M = A Σ Aᵀ`.
struct Projection {
    v: Vec<Vec<f64>>,
    m: linalg::Cholesky,
    chol_j: linalg::Cholesky,
}

fn project(model: &SparsePrecision, c: &LinearConstraint) -> Result<Projection> {
    let p = model.p();
    if c.a.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: c.a.ncols(),
        });
    }
    let chol_j = model.cholesky()?;
    let v: Vec<Vec<f64>> = c.a.rows().into_iter().map(|row| chol_j.solve(&row.to_vec())).collect();
    let k = c.k();
    let mut m = SymMatrix::zeros(k);
    for r in 0..k {
        for s in 0..=r {
            m.set(r, s, c.a.row(r).iter().zip(&v[s]).map(|(x, y)| x * y).sum());
        }
    }
    let m = linalg::cholesky(&m).map_err(|_| Error::RankDeficientConstraint)?;
    Ok(Projection { v, m, chol_j })
}

/// `E[X | A X = z] = μ + Σ Aᵀ (A Σ Aᵀ)⁻¹ (z − A μ)`, using solves against `J`.
pub fn constrained_mean(model: &SparsePrecision, c: &LinearConstraint) -> Result<Vec<f64>> {
    let proj = project(model, c)?;
    Ok(mean_from(&proj, model, c))
}

fn mean_from(proj: &Projection, model: &SparsePrecision, c: &LinearConstraint) -> Vec<f64> {
    let mu = model.mean();
    let resid: Vec<f64> = c
        .a
        .rows()
        .into_iter()
        .zip(&c.z)
        .map(|(row, z)| z - row.iter().zip(mu).map(|(a, m)| a * m).sum::<f64>())
        .collect();
    let lambda = proj.m.solve(&resid);
    let mut out = mu.to_vec();
    for (col, l) in proj.v.iter().zip(&lambda) {
        for (o, x) in out.iter_mut().zip(col) {
            *o += x * l;
        }
    }
    out
}

/// `Cov(X | A X = z) = Σ − Σ Aᵀ (A Σ Aᵀ)⁻¹ A Σ`.
pub fn constrained_covariance(model: &SparsePrecision, c: &LinearConstraint) -> Result<SymMatrix> {
    let proj = project(model, c)?;
    Ok(covariance_from(&proj))
}

fn covariance_from(proj: &Projection) -> SymMatrix {
    let mut sigma = proj.chol_j.inverse();
    let p = sigma.dim();
    // W = M⁻¹ Vᵀ, column by column over variables.
    let k = proj.v.len();
    let mut w = vec![vec![0.0; p]; k];
    for i in 0..p {
        let col = proj.m.solve(&proj.v.iter().map(|v| v[i]).collect::<Vec<_>>());
        for r in 0..k {
            w[r][i] = col[r];
        }
    }
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (0..k).map(|r| proj.v[r][i] * w[r][j]).sum();
            sigma.add(i, j, -s);
        }
    }
    sigma
}

pub fn condition(model: &SparsePrecision, c: &LinearConstraint) -> Result<ScenarioResult> {
    let proj = project(model, c)?;
    Ok(ScenarioResult {
        cond_mean: mean_from(&proj, model, c),
        cond_cov: covariance_from(&proj).to_rows(),
    })
}

/// `J` kept as its weighted local clique/separator inverses.
#[derive(Debug, Clone)]
pub struct DecomposedPrecision {
    p: usize,
    blocks: Vec<LocalBlock>,
}

impl DecomposedPrecision {
    pub fn new(tree: &CliqueTree, cov: &CovariancePair) -> Result<Self> {
        Ok(Self {
            p: tree.p(),
            blocks: tree_blocks(tree, cov)?,
        })
    }

    /// `J v = Σ_C J_C v − Σ_S (k(S) − 1) J_S v`; blocks evaluate in
    /// parallel and are summed in canonical order.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.p, "matvec dimension mismatch");
        let parts: Vec<Vec<f64>> = self
            .blocks
            .par_iter()
            .map(|b| {
                let sub: Vec<f64> = b.vertices.iter().map(|&i| v[i]).collect();
                b.inverse.matvec(&sub)
            })
            .collect();
        let mut out = vec![0.0; self.p];
        for (b, part) in self.blocks.iter().zip(parts) {
            for (&i, x) in b.vertices.iter().zip(part) {
                out[i] += b.weight * x;
            }
        }
        out
    }

    /// Dense sum of the embedded local terms.
    pub fn to_dense(&self) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.p);
        for b in &self.blocks {
            for (a, &i) in b.vertices.iter().enumerate() {
                for (c, &j) in b.vertices.iter().enumerate().take(a + 1) {
                    m.add(i, j, b.weight * b.inverse.get(a, c));
                }
            }
        }
        m
    }

    /// Weighted local sum `Σ_B w_B · f(vertices of B)`.
    fn local_sum(&self, f: impl Fn(&[usize]) -> f64 + Sync) -> f64 {
        let parts: Vec<f64> = self.blocks.par_iter().map(|b| b.weight * f(&b.vertices)).collect();
        parts.into_iter().sum()
    }
}

pub fn decomposed_matvec(tree: &CliqueTree, cov: &CovariancePair, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != tree.p() {
        return Err(Error::DimensionMismatch {
            expected: tree.p(),
            found: v.len(),
        });
    }
    Ok(DecomposedPrecision::new(tree, cov)?.matvec(v))
}

/// Unconditional portfolio P/L moments under a decomposable model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PortfolioMoments {
    pub expected: f64,
    pub variance: f64,
}

/// Expected P/L as clique contributions minus separator contributions, and
/// variance `wᵀ J⁻¹ w` by conjugate gradients on the decomposed `J`.
pub fn portfolio_moments(tree: &CliqueTree, cov: &CovariancePair, w: &[f64]) -> Result<PortfolioMoments> {
    if w.len() != tree.p() {
        return Err(Error::DimensionMismatch {
            expected: tree.p(),
            found: w.len(),
        });
    }
    let dec = DecomposedPrecision::new(tree, cov)?;
    let expected = dec.local_sum(|vs| vs.iter().map(|&i| w[i] * cov.means[i]).sum());
    let x = conjugate_gradient(|v| dec.matvec(v), w, 1e-14, 20 * tree.p() + 100);
    let variance = w.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(PortfolioMoments { expected, variance })
}

fn conjugate_gradient(op: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], rtol: f64, max_iter: usize) -> Vec<f64> {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let stop = rtol * rtol * rr;
    for _ in 0..max_iter {
        if rr <= stop || rr == 0.0 {
            break;
        }
        let ad = op(&d);
        let alpha = rr / dot(&d, &ad);
        for i in 0..x.len() {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..d.len() {
            d[i] = r[i] + beta * d[i];
        }
        rr = rr_new;
    }
    x
}
