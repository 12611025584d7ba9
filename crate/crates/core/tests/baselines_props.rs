mod common;

use common::*;
use logo::baselines::{dense_precision, max_reference, null_precision, ridge_fit, RidgeConfig};
use logo::estimators::ObservationMatrix;
use logo::ifn::{build_mst, build_tmfg};
use logo::precision::{assemble_precision, log_likelihood};
use ndarray::s;
use proptest::prelude::*;

fn halves(obs: &ObservationMatrix) -> (ObservationMatrix, ObservationMatrix) {
    let q = obs.q() / 2;
    let train = ObservationMatrix::new(obs.names().to_vec(), obs.data().slice(s![..q, ..]).to_owned()).unwrap();
    let test = ObservationMatrix::new(obs.names().to_vec(), obs.data().slice(s![q.., ..]).to_owned()).unwrap();
    (train, test)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn max_bounds_every_model(p in 4usize..=25, seed in any::<u64>()) {
        let obs = raw_panel(p, 3, 6 * p, seed);
        let (train, test) = halves(&obs);
        let (ctr, cte) = (pair(&train), pair(&test));
        let bound = max_reference(&cte, test.q()).unwrap().per_obs_loglik;
        prop_assert!((max_reference(&cte, test.q()).unwrap().trace_term - p as f64).abs() < 1e-9);
        let models = vec![
            assemble_precision(&build_tmfg(&ctr.corr).unwrap(), &ctr).unwrap(),
            assemble_precision(&build_mst(&ctr.corr).unwrap(), &ctr).unwrap(),
            dense_precision(&ctr).unwrap(),
            null_precision(&ctr).unwrap(),
            ridge_fit(&train, &RidgeConfig::default()).unwrap().model,
        ];
        for m in &models {
            prop_assert!(log_likelihood(m, &cte, test.q()).unwrap().per_obs_loglik <= bound + 1e-9);
        }
    }

    #[test]
    fn dense_is_exact_inverse(p in 2usize..=30, seed in any::<u64>()) {
        let c = pair(&raw_panel(p, 2, 3 * p, seed));
        let j = dense_precision(&c).unwrap();
        let oracle = lu_inverse(&c.cov);
        prop_assert!(max_abs(&(to_na(&j.to_dense()) - &oracle)) <= 1e-9 * max_abs(&oracle));
        prop_assert_eq!(j.nnz_offdiag(), p * (p - 1) / 2);
    }
}

#[test]
fn ridge_is_reproducible_under_seed() {
    let obs = raw_panel(20, 3, 60, 4);
    let cfg = RidgeConfig {
        seed: 17,
        ..RidgeConfig::default()
    };
    let a = ridge_fit(&obs, &cfg).unwrap();
    let b = ridge_fit(&obs, &cfg).unwrap();
    assert_eq!(a.lambda, b.lambda);
    assert_eq!(a.cv_scores, b.cv_scores);
    assert_eq!(a.model, b.model);
}

#[test]
fn ridge_works_below_dimension_and_dense_does_not() {
    let obs = factor_panel(60, 3, 30, 2);
    let c = pair(&obs);
    assert!(dense_precision(&c).unwrap_err().is_not_positive_definite());
    assert!(max_reference(&c, obs.q()).unwrap_err().is_not_positive_definite());
    let fit = ridge_fit(&obs, &RidgeConfig::default()).unwrap();
    assert!(fit.model.is_positive_definite());
    assert!(fit.lambda > 0.0);
}

#[test]
fn ridge_cv_curve_prefers_small_penalty_on_white_noise() {
    // Independent unit-variance data with many observations: the CV optimum
    // sits in the lower part of the grid and J is close to the identity.
    let mut spec = logo::datagen::FactorModelSpec::new(10, 1, 8);
    spec.loading_scale = 0.0;
    let obs = logo::datagen::gen_factor_model(&spec, 4000).unwrap();
    let cfg = RidgeConfig::default();
    let fit = ridge_fit(&obs, &cfg).unwrap();
    assert!(fit.lambda <= 0.05, "lambda = {}", fit.lambda);
    let best = fit.cv_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(*fit.cv_scores.last().unwrap() < best);
    let j = fit.model.to_dense();
    for i in 0..10 {
        assert!((j.get(i, i) - 1.0).abs() < 0.1);
    }
}

#[test]
fn null_model_scores_unit_variance_entropy() {
    let c = pair(&factor_panel(300, 3, 400, 1));
    let r = log_likelihood(&null_precision(&c).unwrap(), &c, 400).unwrap();
    assert!((r.per_obs_loglik + 150.0 * (1.0 + (2.0 * std::f64::consts::PI).ln())).abs() < 1e-9);
}
