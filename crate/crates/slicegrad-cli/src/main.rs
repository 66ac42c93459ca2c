//! `slicegrad` command line: variance benchmarks, distribution conformance
//! checks, the offset guideline table, and evolution-strategies training.
//!
//! All outputs are CSV (to `--out` or standard out) and are byte-identical
//! for identical arguments and seed, regardless of `--threads`.

use clap::{Args, Parser, Subcommand};
use slicegrad::bench::{
    dist_conformance_report, run_alternatives_bench, run_sigma_bench, run_variance_bench,
    write_conformance_csv, write_guideline_csv, write_variance_csv, BenchConfig,
};
use slicegrad::dist::{ChiParams, DistSpec, GaussianParams, SymBetaParams, TruncRatioParams};
use slicegrad::es::{es_train, write_train_csv, ESConfig, EsSettings, Objective, OptimizerKind};
use slicegrad::estimator::EstimatorKind;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "slicegrad",
    version,
    about = "Gradient-estimator variance benchmarks and ES training",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,

    /// Master seed (SLICEGRAD_SEED is the fallback when the flag is absent).
    #[arg(long, global = true, env = "SLICEGRAD_SEED", default_value_t = 0)]
    seed: u64,

    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; affects runtime only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-gradient variance benchmark on the rank-1 quadratic.
    BenchQuad(BenchArgs),
    /// Scale-gradient benchmark (glr-sigma vs wrg).
    BenchSigma(BenchArgs),
    /// Mean-gradient benchmark including lrg/drg/dlrg alternatives.
    BenchAlt(BenchArgs),
    /// Histogram a sampler against its analytic density.
    DistCheck(DistArgs),
    /// Offset-selection guideline table for the truncated-ratio family.
    CTable,
    /// Train an ES policy with a chosen estimator.
    EsTrain(EsArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Problem dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    dims: Vec<usize>,
    /// Evaluation-noise standard deviation (0 = deterministic).
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Estimators, comma separated; parameters inline (trrg:0.5, brg:1.5).
    #[arg(long)]
    estimators: Option<String>,
    /// Samples averaged into one gradient estimate.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Estimates per cell (default: 5000 up to D=100, 1000 above).
    #[arg(long)]
    repeats: Option<usize>,
    /// Objective center in every coordinate.
    #[arg(long, default_value_t = 1.0)]
    center: f64,
    /// Bootstrap resamples behind the confidence intervals.
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
}

#[derive(Args)]
struct DistArgs {
    /// One of: gaussian, symbeta, bdist, wdist, ldist, truncratio,
    /// betaslice, chi.
    #[arg(long)]
    dist: String,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Truncation offset (truncratio).
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Beta shape (symbeta, betaslice).
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    /// Degrees of freedom (chi).
    #[arg(long, default_value_t = 3)]
    dof: u32,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    bins: usize,
}

#[derive(Args)]
struct EsArgs {
    /// Plain-text key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sphere or cartpole.
    #[arg(long)]
    objective: Option<String>,
    /// Parameter dimension of the sphere objective.
    #[arg(long)]
    dim: Option<usize>,
    /// Observation-noise standard deviation of the sphere objective.
    #[arg(long)]
    noise: Option<f64>,
    /// Episode horizon of the cart-pole objective.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    popsize: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    /// sgd, adam, or adam:<beta1>:<beta2>.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    reward_normalize: Option<bool>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    episodes_per_sample: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("usage: slicegrad <bench-quad|bench-sigma|bench-alt|dist-check|c-table|es-train> [options]; see --help");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    /// Bad arguments: exit code 2, like the argument parser itself.
    Usage(String),
    /// Failure while running: exit code 1.
    Runtime(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<slicegrad::Error> for CliError {
    fn from(e: slicegrad::Error) -> Self {
        match e {
            slicegrad::Error::Parse(_) | slicegrad::Error::Config(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    match cli.cmd {
        Command::BenchQuad(args) => {
            let cfg = bench_config(&args, seed, "glr,slrg,trrg:0.5,brg:1.5")?;
            let reports = run_variance_bench(&cfg)?;
            write_output(&cli.out, |w| write_variance_csv(w, &reports))?;
        }
        Command::BenchSigma(args) => {
            let cfg = bench_config(&args, seed, "glr-sigma,wrg")?;
            let reports = run_sigma_bench(&cfg)?;
            write_output(&cli.out, |w| write_variance_csv(w, &reports))?;
        }
        Command::BenchAlt(args) => {
            let cfg = bench_config(&args, seed, "glr,slrg,trrg:0.5,brg:1.5,lrg,drg,dlrg")?;
            let reports = run_alternatives_bench(&cfg)?;
            write_output(&cli.out, |w| write_variance_csv(w, &reports))?;
        }
        Command::DistCheck(args) => {
            let spec = dist_spec(&args)?;
            let report = dist_conformance_report(&spec, args.n, args.bins, seed)?;
            eprintln!(
                "chi-square {:.3} on {} dof, p = {:.6}",
                report.fit.statistic, report.fit.dof, report.fit.p_value
            );
            write_output(&cli.out, |w| write_conformance_csv(w, &report))?;
        }
        Command::CTable => {
            write_output(&cli.out, |w| write_guideline_csv(w))?;
        }
        Command::EsTrain(args) => {
            let (cfg, objective) = es_config(&args, seed)?;
            let log = es_train(&cfg, &objective)?;
            write_output(&cli.out, |w| write_train_csv(w, &log))?;
        }
    }
    Ok(())
}

fn bench_config(args: &BenchArgs, seed: u64, default_estimators: &str) -> Result<BenchConfig, CliError> {
    let estimators =
        EstimatorKind::parse_list(args.estimators.as_deref().unwrap_or(default_estimators))?;
    Ok(BenchConfig {
        dims: args.dims.clone(),
        samples_per_estimate: args.samples,
        repeats: args.repeats,
        estimators,
        seed,
        bootstrap_resamples: args.bootstrap,
        noise_sigma: args.noise,
        center: args.center,
    })
}

fn dist_spec(args: &DistArgs) -> Result<DistSpec, CliError> {
    let gauss = || GaussianParams::new(args.mu, args.sigma);
    let beta = || SymBetaParams::with_std(args.alpha, args.mu, args.sigma);
    let spec = match args.dist.to_ascii_lowercase().as_str() {
        "gaussian" => DistSpec::Gaussian(gauss()?),
        "bdist" => DistSpec::BDist(gauss()?),
        "wdist" => DistSpec::WDist(gauss()?),
        "ldist" => DistSpec::LDist(gauss()?),
        "truncratio" => DistSpec::TruncRatio(TruncRatioParams::new(args.c, args.mu, args.sigma)?),
        "symbeta" => DistSpec::SymBeta(beta()?),
        "betaslice" => DistSpec::BetaSlice(beta()?),
        "chi" => DistSpec::Chi(ChiParams::new(args.dof)?),
        other => {
            return Err(CliError::Usage(format!(
                "unknown distribution `{other}` (expected gaussian, symbeta, bdist, wdist, ldist, truncratio, betaslice or chi)"
            )))
        }
    };
    Ok(spec)
}

fn es_config(args: &EsArgs, seed: u64) -> Result<(ESConfig, Objective), CliError> {
    let mut settings = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            EsSettings::from_kv_text(&text)?
        }
        None => EsSettings::default(),
    };
    // Flags win over the file.
    if let Some(v) = args.popsize {
        settings.popsize = Some(v);
    }
    if let Some(v) = args.sigma {
        settings.sigma = Some(v);
    }
    if let Some(v) = args.lr {
        settings.lr = Some(v);
    }
    if let Some(v) = &args.optimizer {
        settings.optimizer = Some(OptimizerKind::parse(v)?);
    }
    if let Some(v) = &args.estimator {
        settings.estimator = Some(EstimatorKind::parse(v)?);
    }
    if let Some(v) = args.reward_normalize {
        settings.reward_normalize = Some(v);
    }
    if let Some(v) = args.iterations {
        settings.iterations = Some(v);
    }
    if let Some(v) = args.eval_every {
        settings.eval_every = Some(v);
    }
    if let Some(v) = args.episodes_per_sample {
        settings.episodes_per_sample = Some(v);
    }
    if let Some(v) = &args.objective {
        match v.as_str() {
            "sphere" | "cartpole" => settings.objective = Some(v.clone()),
            other => return Err(CliError::Usage(format!("unknown objective `{other}`"))),
        }
    }
    if let Some(v) = args.dim {
        settings.dim = Some(v);
    }
    if let Some(v) = args.noise {
        settings.noise = Some(v);
    }
    if let Some(v) = args.horizon {
        settings.horizon = Some(v);
    }

    let defaults = ESConfig::default();
    let cfg = ESConfig {
        popsize: settings.popsize.unwrap_or(defaults.popsize),
        sigma: settings.sigma.unwrap_or(defaults.sigma),
        lr: settings.lr.unwrap_or(defaults.lr),
        optimizer: settings.optimizer.unwrap_or(defaults.optimizer),
        estimator: settings.estimator.unwrap_or(defaults.estimator),
        reward_normalize: settings.reward_normalize.unwrap_or(defaults.reward_normalize),
        iterations: settings.iterations.unwrap_or(defaults.iterations),
        eval_every: settings.eval_every.unwrap_or(defaults.eval_every),
        episodes_per_sample: settings
            .episodes_per_sample
            .unwrap_or(defaults.episodes_per_sample),
        seed: settings.seed.unwrap_or(seed),
        initial_mu: None,
    };
    let objective = match settings.objective.as_deref().unwrap_or("cartpole") {
        "sphere" => Objective::Sphere {
            dim: settings.dim.unwrap_or(71),
            noise_sigma: settings.noise.unwrap_or(0.0),
        },
        _ => Objective::CartPole {
            horizon: settings.horizon.unwrap_or(1000),
        },
    };
    Ok((cfg, objective))
}

fn write_output<F>(out: &Option<PathBuf>, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            let mut w = std::io::BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
        }
    }
    Ok(())
}
