use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use lcshift::lcmle::{aggregate, fit_lcmle_with, FitOptions, DEFAULT_TOLERANCE};
use lcshift::shift::{one_step_at_level, DEFAULT_CI_LEVEL};
use lcshift::{SmoothedDensity, TwoSample};
use lcshift_harness::experiment::run_experiment;
use lcshift_harness::input::read_sample;
use lcshift_harness::output::emit_csv;
use lcshift_harness::plot::emit_plots;
use lcshift_harness::{ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(
    name = "lcshift",
    version,
    about = "Log-concave two-sample location shift estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the log-concave MLE to a sample file.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Also report the variance-matching Gaussian smoothing bandwidth.
        #[arg(long)]
        smooth: bool,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
    },
    /// One-step estimate of the shift of `y` relative to `x`.
    Estimate {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = DEFAULT_CI_LEVEL)]
        level: f64,
    },
    /// Run a Monte Carlo experiment and write its CSV summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Draw SVG charts from a simulation CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Nominal coverage drawn on the coverage panels.
        #[arg(long, default_value_t = DEFAULT_CI_LEVEL)]
        level: f64,
    },
}

#[derive(Serialize)]
struct FitReport {
    knots: Vec<f64>,
    log_values: Vec<f64>,
    n: usize,
    log_likelihood: f64,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
}

#[derive(Serialize)]
struct EstimateReport {
    delta_hat: f64,
    fisher_info: f64,
    eta: f64,
    ci_low: f64,
    ci_high: f64,
    ci_level: f64,
    m: usize,
    n: usize,
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serializes")
    );
}

fn fit(input: PathBuf, smooth: bool, tol: f64) -> Result<()> {
    let data = read_sample(&input)?;
    let sample = aggregate(&data)?;
    let fit = fit_lcmle_with(
        &sample,
        &FitOptions {
            tol,
            ..FitOptions::default()
        },
    )?;
    let bandwidth = if smooth {
        if data.len() < 2 {
            return Err(
                lcshift::Error::InvalidArgument("smoothing needs at least two observations".into()).into(),
            );
        }
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let s_sq = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (data.len() - 1) as f64;
        Some(SmoothedDensity::from_sample_variance(fit.density.clone(), s_sq)?.bandwidth())
    } else {
        None
    };
    print_json(&FitReport {
        knots: fit.density.knots().to_vec(),
        log_values: fit.density.log_values().to_vec(),
        n: data.len(),
        log_likelihood: fit.log_likelihood,
        iterations: fit.iterations,
        bandwidth,
    });
    Ok(())
}

fn estimate(x: PathBuf, y: PathBuf, eta: f64, level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(HarnessError::Config(format!("level {level} outside (0, 1)")));
    }
    if !(0.0..0.5).contains(&eta) {
        return Err(HarnessError::Config(format!("eta {eta} outside [0, 0.5)")));
    }
    let ts = TwoSample::new(read_sample(&x)?, read_sample(&y)?)?;
    let est = one_step_at_level(&ts, eta, level)?;
    print_json(&EstimateReport {
        delta_hat: est.delta_hat,
        fisher_info: est.fisher_info,
        eta: est.eta,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
        ci_level: est.ci_level,
        m: est.m,
        n: est.n,
    });
    Ok(())
}

fn simulate(
    config: PathBuf,
    seed: Option<u64>,
    reps: Option<usize>,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<()> {
    let cfg = ExperimentConfig::load_with(&config, |cfg| {
        cfg.seed = seed.unwrap_or(cfg.seed);
        cfg.replications = reps.unwrap_or(cfg.replications);
        cfg.workers = workers.unwrap_or(cfg.workers);
        if let Some(out) = out {
            cfg.output = out;
        }
    })?;
    let rows = run_experiment(&cfg)?;
    emit_csv(&rows, &cfg.output)?;
    log::info!("wrote {} rows to {}", rows.len(), cfg.output.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { input, smooth, tol } => fit(input, smooth, tol),
        Command::Estimate { x, y, eta, level } => estimate(x, y, eta, level),
        Command::Simulate {
            config,
            seed,
            reps,
            out,
            workers,
        } => simulate(config, seed, reps, out, workers),
        Command::Plot { csv, out_dir, level } => emit_plots(&csv, &out_dir, level).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
