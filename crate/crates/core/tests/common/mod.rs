#![allow(dead_code)]

use logo::datagen::{gen_factor_model, FactorModelSpec};
use logo::estimators::{CovariancePair, ObservationMatrix};
use logo::SymMatrix;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_na(m: &SymMatrix) -> DMatrix<f64> {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m.get(i, j))
}

pub fn from_na(m: &DMatrix<f64>) -> SymMatrix {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| 0.5 * (m[(i, j)] + m[(j, i)])).collect())
        .collect();
    SymMatrix::from_rows(&rows).unwrap()
}

/// General LU inverse; independent of the Cholesky code under test.
pub fn lu_inverse(m: &SymMatrix) -> DMatrix<f64> {
    to_na(m).lu().try_inverse().expect("singular oracle input")
}

pub fn lu_logdet(m: &SymMatrix) -> f64 {
    let lu = to_na(m).lu();
    let u = lu.u();
    let mut sum = 0.0;
    for i in 0..u.nrows() {
        assert!(u[(i, i)] != 0.0);
        sum += u[(i, i)].abs().ln();
    }
    sum
}

/// `AᵀA + εI` with standard-normal `A`.
pub fn random_spd(n: usize, eps: f64, seed: u64) -> SymMatrix {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
    from_na(&(a.transpose() * &a + DMatrix::identity(n, n) * eps))
}

pub fn factor_panel(p: usize, k: usize, q: usize, seed: u64) -> ObservationMatrix {
    gen_factor_model(&FactorModelSpec::new(p, k, seed), q).unwrap()
}

/// Unstandardised panel with heterogeneous scales.
pub fn raw_panel(p: usize, k: usize, q: usize, seed: u64) -> ObservationMatrix {
    let mut spec = FactorModelSpec::new(p, k, seed);
    spec.standardize = false;
    spec.noise_variance = 0.5;
    gen_factor_model(&spec, q).unwrap()
}

/// Dense covariance of a panel computed directly from the rows.
pub fn naive_cov(obs: &ObservationMatrix) -> DMatrix<f64> {
    let (q, p) = obs.data().dim();
    let x = DMatrix::from_fn(q, p, |t, i| obs.data()[[t, i]]);
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c.transpose() * &c / q as f64
}

pub fn pair(obs: &ObservationMatrix) -> CovariancePair {
    logo::estimate(obs).unwrap()
}

/// Gaussian conditioning `X_b | X_a` from a dense covariance: returns
/// `(Σ_ba Σ_aa⁻¹, Σ_bb − Σ_ba Σ_aa⁻¹ Σ_ab)`.
pub fn schur(sigma: &DMatrix<f64>, a: &[usize], b: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| sigma[(r[i], c[j])]);
    let saa = sub(a, a);
    let sba = sub(b, a);
    let sbb = sub(b, b);
    let beta = &sba * saa.lu().try_inverse().unwrap();
    let cov = sbb - &beta * sba.transpose();
    (beta, cov)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
}
