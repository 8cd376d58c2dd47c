//! Reproducible experiment driver. Exit codes: 0 when every certificate
//! passes, 1 on certificate failure, 2 on configuration errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bessel_hardy::atoms::{decompose_two_bump, Atom, AtomicDecomposition, TwoBumpFunction};
use bessel_hardy::battery::{battery_generate, symbol_battery, BatteryConfig};
use bessel_hardy::config::ExperimentConfig;
use bessel_hardy::factorization::{
    weak_factorize, ConstantSchedule, FactorizeOptions, SamplingConfig,
};
use bessel_hardy::kernels::{estimate_regime_constants, RieszKernelCache};
use bessel_hardy::measure::{measure, measure_endpoints, BesselParam, Interval};
use bessel_hardy::operators::{sample_commutator, CommutatorExponents};
use bessel_hardy::step::StepFunction;

mod runs;

#[derive(Parser)]
#[command(name = "bessel-hardy", version, about = "Bessel-setting Hardy space experiments")]
struct Cli {
    /// Configuration file (flat key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override any config key, e.g. --set lambda_list=1.0 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory; also settable via the BESSEL_HARDY_OUT env var.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the Riesz kernel over a log grid and emit size-bound ratios.
    KernelScan(KernelScanArgs),
    /// Decompose a two-bump function into atoms and print the table.
    AtomDemo(AtomDemoArgs),
    /// Run the iterative weak factorization on an atomic decomposition file.
    Factorize(FactorizeArgs),
    /// Commutator operator-norm ratios over a seeded battery.
    CommutatorBench(CommutatorBenchArgs),
}

#[derive(Args)]
struct KernelScanArgs {
    /// Grid points per axis.
    #[arg(long, default_value_t = 64)]
    grid: usize,
}

#[derive(Args)]
struct AtomDemoArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.95)]
    p: f64,
    /// First bump center.
    #[arg(long, default_value_t = 1.0)]
    x1: f64,
    /// Second bump center.
    #[arg(long, default_value_t = 3.0)]
    x2: f64,
    /// Common bump radius.
    #[arg(long, default_value_t = 0.25)]
    r: f64,
}

#[derive(Args)]
struct FactorizeArgs {
    /// Input file: one `alpha center radius profile-file` line per atom.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Separation constant; 0 derives the smallest admissible power of two.
    #[arg(long, default_value_t = 0.0)]
    m: f64,
    #[arg(long)]
    k_max: Option<usize>,
}

#[derive(Args)]
struct CommutatorBenchArgs {
    /// Input exponent (must exceed 1).
    #[arg(long, default_value_t = 2.0)]
    p_in: f64,
    /// Output exponent (must exceed p_in).
    #[arg(long, default_value_t = 4.0)]
    q_out: f64,
    /// Atoms per lambda.
    #[arg(long, default_value_t = 8)]
    atoms: usize,
    /// Symbols per lambda.
    #[arg(long, default_value_t = 4)]
    symbols: usize,
    /// Sample points per norm evaluation.
    #[arg(long, default_value_t = 48)]
    points: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(message) => {
            eprintln!("configuration error: {message}");
            return ExitCode::from(2);
        }
    };

    if cfg.threads != 0 {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    if let Err(e) = fs::create_dir_all(&cfg.output_dir) {
        eprintln!("configuration error: cannot create {:?}: {e}", cfg.output_dir);
        return ExitCode::from(2);
    }

    let outcome = match &cli.command {
        Command::KernelScan(args) => runs::kernel_scan(&cfg, args.grid),
        Command::AtomDemo(args) => runs::atom_demo(&cfg, args),
        Command::Factorize(args) => runs::factorize(&cfg, args),
        Command::CommutatorBench(args) => runs::commutator_bench(&cfg, args),
    };

    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("certificate failure: see the report above");
            ExitCode::from(1)
        }
        Err(e) => match e {
            bessel_hardy::Error::ConfigInvalid(_) | bessel_hardy::Error::InvalidParam(_) => {
                eprintln!("configuration error: {e}");
                ExitCode::from(2)
            }
            other => {
                eprintln!("run failed: {other}");
                ExitCode::from(1)
            }
        },
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{path:?}: {e}"))?;
            ExperimentConfig::parse(&text).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::default(),
    };
    for assignment in &cli.overrides {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| format!("--set needs KEY=VALUE, got {assignment:?}"))?;
        cfg.set(key.trim(), value).map_err(|e| e.to_string())?;
    }
    if let Ok(dir) = std::env::var("BESSEL_HARDY_OUT") {
        cfg.output_dir = PathBuf::from(dir);
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}
