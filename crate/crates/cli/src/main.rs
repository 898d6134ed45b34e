//! `gradstream`: run the simulator and its experiments from the command line.
//!
//! Exit status is 0 on success, 1 when a run fails and 2 for usage or
//! configuration errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gradstream_core::experiments::{
    convergence_config, default_rate_configs, rate_table, run_convergence, run_error_growth, run_mse_comparison,
    run_timeseries, ErrorGrowthSpec, MseSpec, TimeseriesSpec,
};
use gradstream_core::metrics::write_csv;
use gradstream_core::pipeline::master_momentum_sim;
use gradstream_core::{run_training, Error, PredictorKind, QuantizerSpec};

use gradstream_cli::config::{Entries, RUN_KEYS};

#[derive(Parser)]
#[command(name = "gradstream", version, about = "Simulate compressed momentum-SGD with predictive coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train with the configured pipeline and write per-worker metrics.
    Simulate(Common),
    /// Trace one component of the worker chain over time.
    Timeseries(Common),
    /// Squared error-feedback norm per round.
    ErrorGrowth(Common),
    /// Compare the best gradient norm of a run with its convergence bound.
    Convergence(Common),
    /// Analytic and measured bits per component for each scheme.
    RateTable(Common),
    /// Per-round distortion with and without the Est-K predictor.
    MseCompare(Common),
    /// Momentum applied at the master, with and without error feedback.
    MasterMomentum(Common),
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file of key=value pairs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

/// Errors found before anything runs are usage errors.
fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: Error) -> Failure {
    match e {
        Error::Config { .. } => Failure::Usage(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    }
}

#[derive(Serialize)]
struct ErrorGrowthRow {
    t: usize,
    error_norm_sq: f64,
}

#[derive(Serialize)]
struct ConvergenceRow {
    seed: u64,
    iterations: usize,
    workers: usize,
    step_size: f64,
    distortion: f64,
    empirical_min: f64,
    bound_a: f64,
    bound_b: f64,
    bound_total: f64,
    plain_sgd_bound: f64,
    within_bound: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gradstream: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let (name, common, allowed): (&str, &Common, &[&str]) = match &cli.command {
        Command::Simulate(c) => ("simulate", c, RUN_KEYS),
        Command::Timeseries(c) => (
            "timeseries",
            c,
            &["scheme", "beta", "predictor", "k", "k_frac", "d", "iters", "seed"],
        ),
        Command::ErrorGrowth(c) => ("error-growth", c, &["ef", "beta", "k", "k_frac", "d", "iters", "seed"]),
        Command::Convergence(c) => (
            "convergence",
            c,
            &["scheme", "delta", "d", "workers", "iters", "sigma2", "seed"],
        ),
        Command::RateTable(c) => ("rate-table", c, &["d", "iters", "seed"]),
        Command::MseCompare(c) => (
            "mse-compare",
            c,
            &["scheme", "beta", "k", "k_frac", "d", "workers", "iters", "lr", "seed"],
        ),
        Command::MasterMomentum(c) => (
            "master-momentum",
            c,
            &[
                "scheme",
                "k",
                "k_frac",
                "delta",
                "d",
                "workers",
                "iters",
                "lr",
                "problem",
                "sigma2",
                "seed",
                "blocks",
                "master_beta",
            ],
        ),
    };
    let mut entries = load_entries(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        entries.set("seed", seed);
    }
    entries.allow_only(allowed, name).map_err(usage)?;
    let out = Output {
        path: common.output.as_deref(),
        format: common.format,
    };

    match &cli.command {
        Command::Simulate(_) => {
            let config = entries.run_config().map_err(usage)?;
            out.write(&run_training(&config).map_err(runtime)?.rows)
        }
        Command::Timeseries(_) => {
            let mut spec = TimeseriesSpec::new(0.995, PredictorKind::Zero, 0);
            spec.dim = entries.usize("d").map_err(usage)?.unwrap_or(spec.dim);
            spec.quantizer = entries.quantizer(spec.dim, Some(spec.quantizer)).map_err(usage)?;
            spec.beta = entries.f64("beta").map_err(usage)?.unwrap_or(spec.beta);
            spec.predictor = entries.predictor().map_err(usage)?.unwrap_or(spec.predictor);
            spec.iterations = entries.usize("iters").map_err(usage)?.unwrap_or(spec.iterations);
            spec.seed = entries.u64("seed").map_err(usage)?.unwrap_or(spec.seed);
            spec.run_config().and_then(|c| c.validate()).map_err(usage)?;
            out.write(&run_timeseries(&spec).map_err(runtime)?)
        }
        Command::ErrorGrowth(_) => {
            let mut spec = ErrorGrowthSpec::new(true, 0);
            spec.error_feedback = entries.bool("ef").map_err(usage)?.unwrap_or(true);
            spec.dim = entries.usize("d").map_err(usage)?.unwrap_or(spec.dim);
            spec.k = entries.k(spec.dim).map_err(usage)?.unwrap_or(spec.k);
            spec.beta = entries.f64("beta").map_err(usage)?.unwrap_or(spec.beta);
            spec.iterations = entries.usize("iters").map_err(usage)?.unwrap_or(spec.iterations);
            spec.seed = entries.u64("seed").map_err(usage)?.unwrap_or(spec.seed);
            spec.run_config().validate().map_err(usage)?;
            let rows: Vec<_> = run_error_growth(&spec)
                .map_err(runtime)?
                .into_iter()
                .enumerate()
                .map(|(t, error_norm_sq)| ErrorGrowthRow { t, error_norm_sq })
                .collect();
            out.write(&rows)
        }
        Command::Convergence(_) => {
            let dim = entries.usize("d").map_err(usage)?.unwrap_or(100);
            let q = entries
                .quantizer(dim, Some(QuantizerSpec::DitheredUniform { step: 0.05 }))
                .map_err(usage)?;
            let delta = match q {
                QuantizerSpec::DitheredUniform { step } => Some(step),
                QuantizerSpec::Passthrough => None,
                other => {
                    return Err(Failure::Usage(format!(
                        "configuration error in `scheme`: convergence supports dithered or passthrough, got {}",
                        other.name()
                    )))
                }
            };
            let config = convergence_config(
                dim,
                entries.usize("workers").map_err(usage)?.unwrap_or(4),
                entries.usize("iters").map_err(usage)?.unwrap_or(10_000),
                entries.f64("sigma2").map_err(usage)?.unwrap_or(1.0),
                delta,
                entries.u64("seed").map_err(usage)?.unwrap_or(0),
            );
            config.validate().map_err(usage)?;
            let r = run_convergence(&config).map_err(runtime)?;
            out.write(&[ConvergenceRow {
                seed: r.seed,
                iterations: r.iterations,
                workers: r.workers,
                step_size: r.step_size,
                distortion: r.distortion,
                empirical_min: r.empirical_min,
                bound_a: r.bound.a,
                bound_b: r.bound.b,
                bound_total: r.bound.total,
                plain_sgd_bound: r.plain_sgd_bound,
                within_bound: r.within_bound,
            }])
        }
        Command::RateTable(_) => {
            let dim = entries.usize("d").map_err(usage)?.unwrap_or(10_000);
            let seed = entries.u64("seed").map_err(usage)?.unwrap_or(0);
            let mut configs = default_rate_configs(dim, seed);
            if let Some(t) = entries.usize("iters").map_err(usage)? {
                if t == 0 {
                    return Err(usage(Error::config("iters", "must be >= 1")));
                }
                configs.iter_mut().for_each(|c| c.iterations = t);
            }
            out.write(&rate_table(&configs).map_err(runtime)?)
        }
        Command::MseCompare(_) => {
            let mut spec = MseSpec::new(0);
            spec.dim = entries.usize("d").map_err(usage)?.unwrap_or(spec.dim);
            spec.quantizer = entries.quantizer(spec.dim, Some(spec.quantizer)).map_err(usage)?;
            spec.beta = entries.f64("beta").map_err(usage)?.unwrap_or(spec.beta);
            spec.workers = entries.usize("workers").map_err(usage)?.unwrap_or(spec.workers);
            spec.iterations = entries.usize("iters").map_err(usage)?.unwrap_or(spec.iterations);
            spec.lr = entries.f64("lr").map_err(usage)?.unwrap_or(spec.lr);
            spec.seed = entries.u64("seed").map_err(usage)?.unwrap_or(spec.seed);
            spec.run_config(PredictorKind::EstK).validate().map_err(usage)?;
            out.write(&run_mse_comparison(&spec).map_err(runtime)?.rows())
        }
        Command::MasterMomentum(_) => {
            let master_beta = entries.f64("master_beta").map_err(usage)?.unwrap_or(0.9);
            let mut run_entries = entries.clone();
            run_entries.remove("master_beta");
            let config = run_entries.run_config().map_err(usage)?;
            out.write(&master_momentum_sim(&config, master_beta).map_err(runtime)?)
        }
    }
}

/// Cap worker parallelism from `GRADSTREAM_THREADS`.
fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("GRADSTREAM_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("GRADSTREAM_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))
}

fn load_entries(path: Option<&Path>) -> Result<Entries, Failure> {
    let Some(path) = path else {
        return Ok(Entries::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    Entries::parse(&text).map_err(usage)
}

struct Output<'a> {
    path: Option<&'a Path>,
    format: Format,
}

impl Output<'_> {
    fn write<T: Serialize>(&self, rows: &[T]) -> Result<(), Failure> {
        let io_err = |e: io::Error| Failure::Runtime(format!("write failed: {e}"));
        let mut sink: Box<dyn Write> = match self.path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", p.display())))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        match self.format {
            Format::Csv => write_csv(&mut sink, rows).map_err(runtime)?,
            Format::Json => {
                serde_json::to_writer_pretty(&mut sink, rows).map_err(|e| Failure::Runtime(e.to_string()))?;
                sink.write_all(b"\n").map_err(io_err)?;
            }
        }
        sink.flush().map_err(io_err)
    }
}
