//! Synthetic panels: linear factor models and draws from a fitted GMRF.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::ObservationMatrix;
use crate::precision::SparsePrecision;
use crate::rng::stream_rng;

/// `X_t = B f_t + ε_t` with Gaussian loadings, unit-variance factors and
/// homoskedastic noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModelSpec {
    pub p: usize,
    pub n_factors: usize,
    pub loading_scale: f64,
    pub noise_variance: f64,
    pub standardize: bool,
    pub seed: u64,
}

impl FactorModelSpec {
    pub fn new(p: usize, n_factors: usize, seed: u64) -> Self {
        Self {
            p,
            n_factors,
            loading_scale: 1.0,
            noise_variance: 1.0,
            standardize: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::InvalidInput("factor model needs p >= 2".into()));
        }
        if self.n_factors < 1 {
            return Err(Error::InvalidInput("factor model needs at least one factor".into()));
        }
        if !(self.noise_variance > 0.0) || !self.loading_scale.is_finite() {
            return Err(Error::InvalidInput("noise variance must be positive".into()));
        }
        Ok(())
    }
}

/// Loadings come from stream 0 of the spec seed, observations from stream 1.
pub fn gen_factor_model(spec: &FactorModelSpec, q: usize) -> Result<ObservationMatrix> {
    spec.validate()?;
    if q < 2 {
        return Err(Error::InsufficientData { needed: 2, available: q });
    }
    let (p, k) = (spec.p, spec.n_factors);
    let mut rng = stream_rng(spec.seed, 0);
    let loadings = Array2::from_shape_fn((p, k), |_| spec.loading_scale * rng.sample::<f64, _>(StandardNormal));

    let mut rng = stream_rng(spec.seed, 1);
    let noise_sd = spec.noise_variance.sqrt();
    let mut data = Array2::<f64>::zeros((q, p));
    let mut f = vec![0.0; k];
    for mut row in data.rows_mut() {
        f.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        for (i, x) in row.iter_mut().enumerate() {
            let common: f64 = loadings.row(i).iter().zip(&f).map(|(b, g)| b * g).sum();
            *x = common + noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let obs = ObservationMatrix::from_array(data)?;
    if spec.standardize {
        obs.standardized()
    } else {
        Ok(obs)
    }
}

/// `q` independent draws from `N(μ, J⁻¹)`, one per row.
///
/// With `J = L Lᵀ`, each draw is `μ + x` where `Lᵀ x = u`, `u ~ N(0, I)`.
pub fn sample_gmrf(model: &SparsePrecision, q: usize, seed: u64) -> Result<Array2<f64>> {
    let chol = model.cholesky()?;
    let p = model.p();
    let mut rng = stream_rng(seed, 0);
    let mut out = Array2::<f64>::zeros((q, p));
    let mut u = vec![0.0; p];
    for mut row in out.rows_mut() {
        u.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        chol.backward_substitute(&mut u);
        for ((dst, x), m) in row.iter_mut().zip(&u).zip(model.mean()) {
            *dst = x + m;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimate;
    use crate::precision::Structure;

    #[test]
    fn deterministic_under_seed() {
        let spec = FactorModelSpec::new(10, 3, 5);
        assert_eq!(gen_factor_model(&spec, 20).unwrap(), gen_factor_model(&spec, 20).unwrap());
        let other = FactorModelSpec::new(10, 3, 6);
        assert_ne!(gen_factor_model(&spec, 20).unwrap(), gen_factor_model(&other, 20).unwrap());
    }

    #[test]
    fn standardized_output_has_unit_variance() {
        let c = estimate(&gen_factor_model(&FactorModelSpec::new(12, 2, 1), 50).unwrap()).unwrap();
        for v in c.variances {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_factor_limit_is_rank_one() {
        let mut spec = FactorModelSpec::new(6, 1, 3);
        spec.noise_variance = 1e-10;
        let c = estimate(&gen_factor_model(&spec, 200).unwrap()).unwrap();
        for i in 0..6 {
            for j in 0..i {
                assert!(c.corr.get(i, j).abs() > 0.999);
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = FactorModelSpec::new(10, 0, 0);
        assert!(gen_factor_model(&s, 10).is_err());
        s.n_factors = 1;
        s.noise_variance = 0.0;
        assert!(gen_factor_model(&s, 10).is_err());
    }

    #[test]
    fn single_gmrf_draw_is_reproducible() {
        let j = SparsePrecision::new(2, vec![1.0, -1.0], vec![(0, 0, 1.0), (1, 1, 1.0)], Structure::DIAGONAL).unwrap();
        let a = sample_gmrf(&j, 1, 9).unwrap();
        assert_eq!(a.dim(), (1, 2));
        assert_eq!(a, sample_gmrf(&j, 1, 9).unwrap());
    }
}
