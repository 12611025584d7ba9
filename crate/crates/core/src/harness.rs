//! Monte Carlo benchmark: repeated train/test splits, model fits and
//! off-sample likelihood scoring, aggregated per `(model, q)`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{dense_precision, max_reference, null_precision, ridge_precision, RidgeConfig};
use crate::datagen::{gen_factor_model, FactorModelSpec};
use crate::error::{Error, Result};
use crate::estimators::{estimate, shuffle_stationarize, CovariancePair, ObservationMatrix};
use crate::ifn::{build_mst, build_tmfg};
use crate::precision::{assemble_precision, log_likelihood, SparsePrecision};
use crate::rng::{derive_seed, stream_rng};

/// Environment fallback for the worker count.
pub const THREADS_ENV: &str = "LOGO_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Rows are permuted first, destroying serial dependence.
    Shuffled,
    /// Training window immediately precedes the test window.
    Sequential,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffled" | "shuffle" => Ok(Self::Shuffled),
            "sequential" => Ok(Self::Sequential),
            _ => Err(Error::InvalidInput(format!("unknown split mode {s:?}"))),
        }
    }
}

/// Two disjoint windows of `q` rows.
pub fn split_train_test(
    obs: &ObservationMatrix,
    q: usize,
    mode: SplitMode,
    seed: u64,
) -> Result<(ObservationMatrix, ObservationMatrix)> {
    let total = obs.q();
    if q < 2 || 2 * q > total {
        return Err(Error::InsufficientData {
            needed: 2 * q.max(2),
            available: total,
        });
    }
    let source = match mode {
        SplitMode::Shuffled => shuffle_stationarize(obs, derive_seed(seed, 1)),
        SplitMode::Sequential => obs.clone(),
    };
    let start = stream_rng(seed, 0).random_range(0..=total - 2 * q);
    let train: Vec<usize> = (start..start + q).collect();
    let test: Vec<usize> = (start + q..start + 2 * q).collect();
    Ok((source.select_rows(&train)?, source.select_rows(&test)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelKind {
    Tmfg,
    Mst,
    Dense,
    Null,
    Ridge,
    Max,
    External(PathBuf),
}

impl ModelKind {
    pub fn name(&self) -> String {
        match self {
            Self::Tmfg => "tmfg".into(),
            Self::Mst => "mst".into(),
            Self::Dense => "dense".into(),
            Self::Null => "null".into(),
            Self::Ridge => "ridge".into(),
            Self::Max => "max".into(),
            Self::External(p) => format!("external:{}", p.display()),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tmfg" => Self::Tmfg,
            "mst" => Self::Mst,
            "dense" | "inv" => Self::Dense,
            "null" => Self::Null,
            "ridge" => Self::Ridge,
            "max" => Self::Max,
            _ => match s.strip_prefix("external:") {
                Some(path) if !path.is_empty() => Self::External(PathBuf::from(path)),
                _ => return Err(Error::InvalidInput(format!("unknown model {s:?}"))),
            },
        })
    }
}

/// Fits one estimator on a training panel.
pub fn fit_model(kind: &ModelKind, train: &ObservationMatrix, cov: &CovariancePair, ridge: &RidgeConfig) -> Result<SparsePrecision> {
    match kind {
        ModelKind::Tmfg => assemble_precision(&build_tmfg(&cov.corr)?, cov),
        ModelKind::Mst => assemble_precision(&build_mst(&cov.corr)?, cov),
        ModelKind::Dense => dense_precision(cov),
        ModelKind::Null => null_precision(cov),
        ModelKind::Ridge => ridge_precision(train, ridge),
        ModelKind::Max => Err(Error::InvalidInput("max is a test-set reference, not a fitted model".into())),
        ModelKind::External(path) => SparsePrecision::from_json(&std::fs::read_to_string(path)?),
    }
}

#[derive(Debug, Clone)]
pub enum Generator {
    Factor(FactorModelSpec),
    Panel { obs: Arc<ObservationMatrix>, mode: SplitMode },
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub generator: Generator,
    /// Variables drawn per sample (panel generators only).
    pub p_subset: usize,
    pub q_list: Vec<usize>,
    pub n_samples: usize,
    pub models: Vec<ModelKind>,
    pub seed: u64,
    /// Standardise each sampled panel before splitting (panel generators).
    pub standardize: bool,
    pub ridge: RidgeConfig,
    pub threads: Option<usize>,
    /// Wall-clock timings make the report non-reproducible; off by default.
    pub record_timing: bool,
}

impl ExperimentPlan {
    pub fn new(generator: Generator, q_list: Vec<usize>, models: Vec<ModelKind>, seed: u64) -> Self {
        let p_subset = match &generator {
            Generator::Factor(spec) => spec.p,
            Generator::Panel { obs, .. } => obs.p(),
        };
        Self {
            generator,
            p_subset,
            q_list,
            n_samples: 100,
            models,
            seed,
            standardize: false,
            ridge: RidgeConfig::default(),
            threads: None,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_list.is_empty() || self.q_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("q list must be nonempty and strictly ascending".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidInput("need at least one sample".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidInput("no models requested".into()));
        }
        let available = match &self.generator {
            Generator::Factor(spec) => {
                spec.validate()?;
                spec.p
            }
            Generator::Panel { obs, .. } => obs.p(),
        };
        if self.p_subset < 2 || self.p_subset > available {
            return Err(Error::InvalidInput(format!(
                "variable subset {} must lie in 2..={available}",
                self.p_subset
            )));
        }
        self.ridge.validate()
    }
}

/// Aggregated off-sample statistics of one model at one window length.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: String,
    pub q: usize,
    pub mean_loglik: Option<f64>,
    pub std_loglik: Option<f64>,
    /// 2.5% quantile (lower end of the 95% band).
    pub q05: Option<f64>,
    /// 97.5% quantile (upper end of the 95% band).
    pub q95: Option<f64>,
    pub mean_nnz: Option<f64>,
    pub mean_seconds: Option<f64>,
    pub failures: usize,
    pub successes: usize,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    loglik: f64,
    nnz: usize,
    seconds: f64,
}

fn cell_panels(plan: &ExperimentPlan, q: usize, cell_seed: u64) -> Result<(ObservationMatrix, ObservationMatrix)> {
    match &plan.generator {
        Generator::Factor(spec) => {
            let spec = FactorModelSpec {
                seed: derive_seed(cell_seed, 1),
                ..spec.clone()
            };
            let mut obs = gen_factor_model(&spec, 2 * q)?;
            if plan.p_subset < spec.p {
                obs = obs.select_columns(&subset(spec.p, plan.p_subset, cell_seed))?;
            }
            split_train_test(&obs, q, SplitMode::Sequential, derive_seed(cell_seed, 3))
        }
        Generator::Panel { obs, mode } => {
            let mut panel = if plan.p_subset < obs.p() {
                obs.select_columns(&subset(obs.p(), plan.p_subset, cell_seed))?
            } else {
                (**obs).clone()
            };
            if plan.standardize {
                panel = panel.standardized()?;
            }
            split_train_test(&panel, q, *mode, derive_seed(cell_seed, 3))
        }
    }
}

fn subset(p: usize, k: usize, cell_seed: u64) -> Vec<usize> {
    let mut cols = index::sample(&mut stream_rng(derive_seed(cell_seed, 2), 0), p, k).into_vec();
    cols.sort_unstable();
    cols
}

fn run_cell(plan: &ExperimentPlan, q: usize, cell_seed: u64) -> Vec<Result<Outcome>> {
    let panels = cell_panels(plan, q, cell_seed).and_then(|(train, test)| {
        let c_train = estimate(&train)?;
        let c_test = estimate(&test)?;
        Ok((train, c_train, c_test))
    });
    let (train, c_train, c_test) = match panels {
        Ok(v) => v,
        Err(e) => return plan.models.iter().map(|_| Err(e.clone())).collect(),
    };
    let ridge = RidgeConfig {
        seed: derive_seed(cell_seed, 4),
        ..plan.ridge.clone()
    };
    plan.models
        .iter()
        .map(|kind| {
            let start = Instant::now();
            if *kind == ModelKind::Max {
                let r = max_reference(&c_test, q)?;
                let p = c_test.p();
                return Ok(Outcome {
                    loglik: r.per_obs_loglik,
                    nnz: p * (p - 1) / 2,
                    seconds: start.elapsed().as_secs_f64(),
                });
            }
            let model = fit_model(kind, &train, &c_train, &ridge)?;
            let seconds = start.elapsed().as_secs_f64();
            let r = log_likelihood(&model, &c_test, q)?;
            Ok(Outcome {
                loglik: r.per_obs_loglik,
                nnz: model.nnz_offdiag(),
                seconds,
            })
        })
        .collect()
}

fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn aggregate(model: String, q: usize, outcomes: &[&Result<Outcome>], timing: bool) -> FitReport {
    let ok: Vec<Outcome> = outcomes.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failures = outcomes.len() - ok.len();
    let n = ok.len();
    if n == 0 {
        return FitReport {
            model,
            q,
            mean_loglik: None,
            std_loglik: None,
            q05: None,
            q95: None,
            mean_nnz: None,
            mean_seconds: None,
            failures,
            successes: 0,
        };
    }
    let ll: Vec<f64> = ok.iter().map(|o| o.loglik).collect();
    let mean = ll.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (ll.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = ll.clone();
    sorted.sort_by(f64::total_cmp);
    FitReport {
        model,
        q,
        mean_loglik: Some(mean),
        std_loglik: Some(std),
        q05: Some(quantile(&sorted, 0.025)),
        q95: Some(quantile(&sorted, 0.975)),
        mean_nnz: Some(ok.iter().map(|o| o.nnz as f64).sum::<f64>() / n as f64),
        mean_seconds: timing.then(|| ok.iter().map(|o| o.seconds).sum::<f64>() / n as f64),
        failures,
        successes: n,
    }
}

/// Runs every `(q, sample)` cell and aggregates per `(model, q)`.
///
/// Cells are independent work units with their own random streams, so the
/// report does not depend on the number of workers.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<FitReport>> {
    plan.validate()?;
    let cells: Vec<(usize, usize)> = (0..plan.q_list.len())
        .flat_map(|qi| (0..plan.n_samples).map(move |s| (qi, s)))
        .collect();
    let threads = plan.threads.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let results: Vec<Vec<Result<Outcome>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(qi, s)| {
                let cell_seed = derive_seed(plan.seed, ((qi as u64) << 32) | s as u64);
                run_cell(plan, plan.q_list[qi], cell_seed)
            })
            .collect()
    });

    let mut reports = Vec::with_capacity(plan.models.len() * plan.q_list.len());
    for (mi, kind) in plan.models.iter().enumerate() {
        for (qi, &q) in plan.q_list.iter().enumerate() {
            let outcomes: Vec<&Result<Outcome>> = cells
                .iter()
                .zip(&results)
                .filter(|((cq, _), _)| *cq == qi)
                .map(|(_, r)| &r[mi])
                .collect();
            reports.push(aggregate(kind.name(), q, &outcomes, plan.record_timing));
        }
    }
    Ok(reports)
}

pub const REPORT_HEADER: &str = "model,q,mean,std,q05,q95,nnz,seconds,failures";

/// Report CSV; statistics without successful samples are left empty.
pub fn report_csv(reports: &[FitReport]) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.model,
            r.q,
            f(r.mean_loglik),
            f(r.std_loglik),
            f(r.q05),
            f(r.q95),
            f(r.mean_nnz),
            f(r.mean_seconds),
            r.failures
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(q: usize, p: usize) -> ObservationMatrix {
        let rows: Vec<Vec<f64>> = (0..q)
            .map(|t| (0..p).map(|i| ((t * 7 + i * 13) % 11) as f64 + 0.1 * i as f64).collect())
            .collect();
        ObservationMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn forced_sequential_split() {
        let obs = panel(10, 3);
        let (tr, te) = split_train_test(&obs, 5, SplitMode::Sequential, 123).unwrap();
        assert_eq!(tr.data(), &obs.data().slice(ndarray::s![..5, ..]));
        assert_eq!(te.data(), &obs.data().slice(ndarray::s![5.., ..]));
    }

    #[test]
    fn split_needs_enough_rows() {
        let obs = panel(9, 3);
        assert!(matches!(
            split_train_test(&obs, 5, SplitMode::Shuffled, 0),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn model_names_parse() {
        for name in ["tmfg", "mst", "dense", "null", "ridge", "max", "external:/tmp/j.json"] {
            assert_eq!(name.parse::<ModelKind>().unwrap().name(), name);
        }
        assert!("lasso".parse::<ModelKind>().is_err());
        assert!("external:".parse::<ModelKind>().is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v: Vec<f64> = (0..=40).map(f64::from).collect();
        assert!((quantile(&v, 0.025) - 1.0).abs() < 1e-12);
        assert!((quantile(&v, 0.975) - 39.0).abs() < 1e-12);
        assert_eq!(quantile(&[3.0], 0.5), 3.0);
    }

    #[test]
    fn plan_validation() {
        let spec = FactorModelSpec::new(10, 2, 0);
        let mut plan = ExperimentPlan::new(Generator::Factor(spec), vec![20, 10], vec![ModelKind::Null], 0);
        assert!(plan.validate().is_err());
        plan.q_list = vec![10, 20];
        assert!(plan.validate().is_ok());
        plan.n_samples = 0;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn empty_statistics_render_blank() {
        let r = aggregate("dense".into(), 5, &[&Err(Error::NotPositiveDefinite { pivot: 4 })], false);
        assert_eq!(r.failures, 1);
        let csv = report_csv(&[r]);
        assert!(csv.ends_with("dense,5,,,,,,,1\n"));
    }
}
