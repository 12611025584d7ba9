use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use logo::baselines::RidgeConfig;
use logo::conditional::{fit_regression, predict, BlockSplit};
use logo::datagen::{sample_gmrf, FactorModelSpec};
use logo::harness::{fit_model, report_csv, run_experiment, ExperimentPlan, Generator, ModelKind, SplitMode};
use logo::ifn::{build_mst, build_tmfg, CliqueTree};
use logo::io::{read_csv, write_csv_to};
use logo::precision::{log_likelihood, SparsePrecision};
use logo::risk::{condition, LinearConstraint};
use logo::{estimate, Error, ObservationMatrix};

#[derive(Parser)]
#[command(name = "logo", version, about = "Sparse precision matrices from information filtering networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Standardise input columns to zero mean and unit variance.
    #[arg(long, global = true)]
    standardize: bool,
    /// Worker threads.
    #[arg(long, global = true, env = "LOGO_THREADS")]
    threads: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true, visible_alias = "output")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a precision matrix to a CSV panel and write it as JSON.
    Estimate {
        #[arg(long, value_enum, default_value_t = Method::Tmfg)]
        method: Method,
        #[arg(long)]
        input: PathBuf,
    },
    /// Score a fitted model on a test panel.
    Likelihood {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Monte Carlo comparison of estimators over window lengths.
    Benchmark(BenchmarkArgs),
    /// Conditional mean of some variables given values of others.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Indices of the conditioning variables.
        #[arg(long, value_delimiter = ',', required = true)]
        past: Vec<usize>,
        /// Indices of the predicted variables.
        #[arg(long, value_delimiter = ',', required = true)]
        future: Vec<usize>,
        /// Observed values of the conditioning variables.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// Condition on a linear scenario given as JSON.
    Condition {
        #[arg(long)]
        model: PathBuf,
        /// `{"A": [[...]], "z": [...]}` or `{"weights": [...], "loss": L}`.
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Split a portfolio loss across its holdings.
    Allocate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        weights: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        loss: f64,
    },
    /// Draw observations from a fitted model as CSV.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Write the filtered graph of a CSV panel.
    GraphExport {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = GraphMethod::Tmfg)]
        method: GraphMethod,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
    },
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, value_enum, default_value_t = GeneratorKind::Factor)]
    generator: GeneratorKind,
    #[arg(long, default_value_t = 3)]
    factors: usize,
    #[arg(long, default_value_t = 300)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    loading_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_variance: f64,
    /// CSV panel for the csv generator.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "shuffled")]
    mode: SplitMode,
    /// Variables drawn per sample (csv generator); all by default.
    #[arg(long)]
    p_subset: Option<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "tmfg,mst,dense,null,ridge,max")]
    models: Vec<ModelKind>,
    #[arg(long, default_value_t = 2)]
    ridge_folds: usize,
    /// Record mean fit times (makes the report non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Tmfg,
    Mst,
    Dense,
    Null,
    Ridge,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphMethod {
    Tmfg,
    Mst,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Json,
    Edges,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorKind {
    Factor,
    Csv,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.common.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_panel(path: &Path, common: &Common) -> logo::Result<ObservationMatrix> {
    let obs = read_csv(path)?;
    if common.standardize {
        obs.standardized()
    } else {
        Ok(obs)
    }
}

fn load_model(path: &Path) -> logo::Result<SparsePrecision> {
    SparsePrecision::from_json(&std::fs::read_to_string(path)?)
}

fn emit(common: &Common, text: &str) -> logo::Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> logo::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn graph(method: GraphMethod, obs: &ObservationMatrix) -> logo::Result<CliqueTree> {
    let cov = estimate(obs)?;
    match method {
        GraphMethod::Tmfg => build_tmfg(&cov.corr),
        GraphMethod::Mst => build_mst(&cov.corr),
    }
}

fn run(cli: Cli) -> logo::Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Estimate { method, input } => {
            let obs = load_panel(&input, common)?;
            let cov = estimate(&obs)?;
            let kind = match method {
                Method::Tmfg => ModelKind::Tmfg,
                Method::Mst => ModelKind::Mst,
                Method::Dense => ModelKind::Dense,
                Method::Null => ModelKind::Null,
                Method::Ridge => ModelKind::Ridge,
            };
            let ridge = RidgeConfig {
                seed: common.seed,
                ..RidgeConfig::default()
            };
            let model = fit_model(&kind, &obs, &cov, &ridge)?;
            let json = model.to_json() + "\n";
            match &common.out {
                Some(path) => {
                    std::fs::write(path, json)?;
                    println!("{} edges", model.nnz_offdiag());
                }
                None => {
                    print!("{json}");
                    eprintln!("{} edges", model.nnz_offdiag());
                }
            }
        }
        Command::Likelihood { model, test } => {
            let model = load_model(&model)?;
            let test = load_panel(&test, common)?;
            let report = log_likelihood(&model, &estimate(&test)?, test.q())?;
            emit(common, &to_json(&report)?)?;
        }
        Command::Benchmark(args) => {
            let generator = match args.generator {
                GeneratorKind::Factor => Generator::Factor(FactorModelSpec {
                    loading_scale: args.loading_scale,
                    noise_variance: args.noise_variance,
                    standardize: true,
                    ..FactorModelSpec::new(args.p, args.factors, common.seed)
                }),
                GeneratorKind::Csv => {
                    let path = args
                        .input
                        .ok_or_else(|| Error::InvalidInput("the csv generator needs --input".into()))?;
                    Generator::Panel {
                        obs: Arc::new(read_csv(path)?),
                        mode: args.mode,
                    }
                }
            };
            let mut plan = ExperimentPlan::new(generator, args.q, args.models, common.seed);
            if let Some(k) = args.p_subset {
                plan.p_subset = k;
            }
            plan.n_samples = args.samples;
            plan.standardize = common.standardize;
            plan.threads = common.threads;
            plan.record_timing = args.timing;
            plan.ridge.folds = args.ridge_folds;
            let reports = run_experiment(&plan)?;
            emit(common, &report_csv(&reports))?;
        }
        Command::Predict { model, past, future, x } => {
            let model = load_model(&model)?;
            let split = BlockSplit::new(past, future, model.p())?;
            let reg = fit_regression(&model, &split)?;
            let y = predict(&reg, &x, model.mean())?;
            emit(common, &to_json(&y)?)?;
        }
        Command::Condition { model, scenario } => {
            let model = load_model(&model)?;
            let c = LinearConstraint::from_json(&std::fs::read_to_string(scenario)?)?;
            emit(common, &to_json(&condition(&model, &c)?)?)?;
        }
        Command::Allocate { model, weights, loss } => {
            let model = load_model(&model)?;
            let c = LinearConstraint::portfolio(&weights, loss)?;
            emit(common, &to_json(&condition(&model, &c)?)?)?;
        }
        Command::Sample { model, n } => {
            let model = load_model(&model)?;
            let data = sample_gmrf(&model, n, common.seed)?;
            let names: Vec<String> = (0..model.p()).map(|i| format!("x{i}")).collect();
            let mut buf = Vec::new();
            write_csv_to(&mut buf, &names, &data)?;
            emit(common, std::str::from_utf8(&buf).map_err(|e| Error::Io(e.to_string()))?)?;
        }
        Command::GraphExport { input, method, format } => {
            let tree = graph(method, &load_panel(&input, common)?)?;
            let text = match format {
                GraphFormat::Json => tree.to_json() + "\n",
                GraphFormat::Edges => tree.to_edge_list(),
            };
            emit(common, &text)?;
        }
    }
    Ok(())
}

