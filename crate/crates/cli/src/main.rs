use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use zzb_core::experiment::{run_experiment, write_csv, ExperimentConfig, ExperimentError, Preset};
use zzb_core::validation;

/// Ziv-Zakai, expected CRB and a-priori bounds for MIMO radar DoA sweeps.
#[derive(Parser)]
#[command(name = "zzb-mimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the bounds over the configured sweep and write CSV.
    Bounds(RunArgs),
    /// Same as `bounds` with the Monte Carlo ML simulation switched on.
    Simulate(RunArgs),
    /// Run the numerical self-check suite (and check a config if given).
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in base configuration; the file overrides it field by field.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Output CSV path; stdout when neither this nor output.path is set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::from_name(s).ok_or_else(|| format!("unknown preset {s:?} (fig1, fig2, fig3)"))
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_INVALID: u8 = 2;

fn exit_code(e: &ExperimentError) -> ExitCode {
    match e {
        ExperimentError::Parse(_) | ExperimentError::Validation(_) => ExitCode::from(EXIT_INVALID),
        _ => ExitCode::from(EXIT_RUNTIME),
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, String> {
    match threads {
        None => Ok(f()),
        Some(0) => Err("--threads must be at least 1".into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| e.to_string()),
    }
}

fn load(config: Option<&Path>, preset: Option<Preset>) -> Result<ExperimentConfig, ExperimentError> {
    ExperimentConfig::load(config, preset)
}

fn run(args: RunArgs, simulate: bool) -> ExitCode {
    let mut config = match load(args.config.as_deref(), args.preset) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return exit_code(&e);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if simulate {
        config.simulation.enabled = true;
    }
    let out = args.out.or_else(|| config.output.clone());
    let result = with_threads(args.threads, || run_experiment(&config));
    let table = match result {
        Err(msg) => {
            error!("{msg}");
            return ExitCode::from(EXIT_INVALID);
        }
        Ok(Err(e)) => {
            error!("{e}");
            return exit_code(&e);
        }
        Ok(Ok(t)) => t,
    };
    match out {
        Some(path) => {
            if let Err(e) = write_csv(&table, &path) {
                error!("{e}");
                return exit_code(&e);
            }
            info!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => print!("{}", table.to_csv_string()),
    }
    ExitCode::SUCCESS
}

fn validate(args: ValidateArgs) -> ExitCode {
    let mut failed = false;
    if args.config.is_some() || args.preset.is_some() {
        match load(args.config.as_deref(), args.preset) {
            Ok(c) => println!(
                "[PASS] config: {} sweep values x {} SNR points",
                c.combinations().len(),
                c.snr_grid.points().len()
            ),
            Err(e) => {
                println!("[FAIL] config: {e}");
                failed = true;
            }
        }
    }
    let checks = match with_threads(args.threads, || validation::full_suite(args.seed)) {
        Ok(c) => c,
        Err(msg) => {
            error!("{msg}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    for c in &checks {
        println!("{c}");
        failed |= !c.passed;
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    println!("{passed}/{} checks passed", checks.len());
    if failed {
        ExitCode::from(EXIT_INVALID)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Bounds(a) => run(a, false),
        Command::Simulate(a) => run(a, true),
        Command::Validate(a) => validate(a),
    }
}
