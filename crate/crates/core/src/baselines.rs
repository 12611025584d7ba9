//! Reference models: dense inverse, diagonal null, ridge inverse and the
//! in-sample MAX bound.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{estimate, CovariancePair, ObservationMatrix};
use crate::linalg::{self, SymMatrix};
use crate::precision::{report_from, LikelihoodReport, SparsePrecision, Structure};
use crate::rng::stream_rng;

/// `J = Σ̂⁻¹`. Fails whenever Σ̂ is singular, which is always the case for `q <= p`.
pub fn dense_precision(cov: &CovariancePair) -> Result<SparsePrecision> {
    if let Some(q) = cov.n_obs {
        if q <= cov.p() {
            return Err(Error::NotPositiveDefinite { pivot: q.saturating_sub(1) });
        }
    }
    let j = linalg::invert_spd(&cov.cov)?;
    SparsePrecision::from_dense(&j, cov.means.clone(), Structure::DENSE)
}

/// `J = diag(1/σ̂²)`.
pub fn null_precision(cov: &CovariancePair) -> Result<SparsePrecision> {
    if let Some(i) = cov.variances.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroVariance { column: i });
    }
    let entries = cov.variances.iter().enumerate().map(|(i, &v)| (i, i, 1.0 / v)).collect();
    SparsePrecision::new(cov.p(), cov.means.clone(), entries, Structure::DIAGONAL)
}

/// Penalty grid and cross-validation setup for the ridge inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeConfig {
    /// Strictly increasing, positive.
    pub lambda_grid: Vec<f64>,
    /// When set, grid values are multiplied by the mean training variance.
    pub relative_to_mean_variance: bool,
    pub folds: usize,
    /// Seed of the fold assignment.
    pub seed: u64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            lambda_grid: log_space(1e-4, 10.0, 20),
            relative_to_mean_variance: true,
            folds: 2,
            seed: 0,
        }
    }
}

impl RidgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::InvalidInput("ridge grid is empty".into()));
        }
        if self.lambda_grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidInput("ridge grid values must be positive".into()));
        }
        if self.lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("ridge grid must be strictly increasing".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidInput("ridge needs at least 2 folds".into()));
        }
        Ok(())
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn shrunk(cov: &SymMatrix, lambda: f64) -> SymMatrix {
    let mut m = cov.clone();
    for i in 0..m.dim() {
        m.add(i, i, lambda);
    }
    m
}

/// Fitted ridge model and the cross-validation trace that selected it.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub model: SparsePrecision,
    pub lambda: f64,
    /// Absolute penalties tried, in grid order.
    pub lambdas: Vec<f64>,
    /// Mean held-out per-observation log-likelihood for each penalty.
    pub cv_scores: Vec<f64>,
}

/// `J = (Σ̂ + λ* I)⁻¹`, with λ* chosen by k-fold cross-validated likelihood.
pub fn ridge_precision(train: &ObservationMatrix, cfg: &RidgeConfig) -> Result<SparsePrecision> {
    Ok(ridge_fit(train, cfg)?.model)
}

pub fn ridge_fit(train: &ObservationMatrix, cfg: &RidgeConfig) -> Result<RidgeFit> {
    cfg.validate()?;
    let q = train.q();
    if q < 2 * cfg.folds {
        return Err(Error::InsufficientData {
            needed: 2 * cfg.folds,
            available: q,
        });
    }
    let full = estimate(train)?;
    let scale = if cfg.relative_to_mean_variance {
        full.variances.iter().sum::<f64>() / full.p() as f64
    } else {
        1.0
    };
    let lambdas: Vec<f64> = cfg.lambda_grid.iter().map(|l| l * scale).collect();

    let mut order: Vec<usize> = (0..q).collect();
    order.shuffle(&mut stream_rng(cfg.seed, 0));
    let fold_rows: Vec<Vec<usize>> = (0..cfg.folds)
        .map(|f| {
            let mut rows: Vec<usize> = order.iter().copied().skip(f).step_by(cfg.folds).collect();
            rows.sort_unstable();
            rows
        })
        .collect();

    let fold_pairs: Vec<(CovariancePair, CovariancePair, usize)> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| {
            let held = &fold_rows[f];
            let rest: Vec<usize> = (0..cfg.folds)
                .filter(|&g| g != f)
                .flat_map(|g| fold_rows[g].iter().copied())
                .collect();
            let tr = estimate(&train.select_rows(&rest)?)?;
            let te = estimate(&train.select_rows(held)?)?;
            Ok((tr, te, held.len()))
        })
        .collect::<Result<_>>()?;

    let cv_scores: Vec<f64> = lambdas
        .par_iter()
        .map(|&lambda| {
            let mut total = 0.0;
            for (tr, te, n) in &fold_pairs {
                let chol = match linalg::cholesky(&shrunk(&tr.cov, lambda)) {
                    Ok(c) => c,
                    Err(_) => return f64::NEG_INFINITY,
                };
                let j = chol.inverse();
                let logdet = -chol.logdet();
                let trace = j.frobenius_dot(&te.cov);
                total += report_from(logdet, trace, tr.p(), *n, 0).per_obs_loglik;
            }
            total / fold_pairs.len() as f64
        })
        .collect();

    let mut best = 0;
    for (k, &s) in cv_scores.iter().enumerate() {
        if s > cv_scores[best] {
            best = k;
        }
    }
    let lambda = lambdas[best];
    let j = linalg::invert_spd(&shrunk(&full.cov, lambda))?;
    let model = SparsePrecision::from_dense(&j, full.means.clone(), Structure::DENSE)?;
    Ok(RidgeFit {
        model,
        lambda,
        lambdas,
        cv_scores,
    })
}

/// Likelihood of the test covariance under its own inverse: the in-sample optimum.
pub fn max_reference(test: &CovariancePair, q_test: usize) -> Result<LikelihoodReport> {
    if q_test <= test.p() {
        return Err(Error::NotPositiveDefinite { pivot: q_test.saturating_sub(1) });
    }
    let chol = linalg::cholesky(&test.cov)?;
    let p = test.p();
    Ok(report_from(-chol.logdet(), p as f64, p, q_test, p * (p + 1) / 2))
}
