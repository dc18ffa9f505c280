use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use forestmap::config::{ConfigError, Mode, RunConfig};
use forestmap::inputs::load_inputs;
use forestmap::pipeline::{calibrate_heading, evaluate_outputs, run_pipeline, write_synthetic, PipelineError};

/// Lidar mapping with GNSS/IMU penalties.
#[derive(Debug, Parser)]
#[command(name = "forestmap", version)]
struct Cli {
    /// key = value run configuration; defaults to a short synthetic corridor.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `out` from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured mapping mode.
    #[arg(long, global = true, value_parser = ["prior", "baseline", "penalty"])]
    mode: Option<String>,
    /// Record wall-clock timings (makes metrics non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the mapping pipeline.
    Map,
    /// Write a synthetic scenario to disk as recorded inputs.
    Synth,
    /// Evaluate a finished run against ground truth.
    Eval {
        /// Directory holding map.ply and trajectory.csv (default: --out).
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Estimate the magnetometer heading offset.
    CalibHeading,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(mode) = &cli.mode {
        cfg.mode = Mode::parse(mode).ok_or_else(|| ConfigError::Invalid(format!("unknown mode '{mode}'")))?;
    }
    cfg.timing |= cli.timing;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Map => print!("{}", run_pipeline(&cfg)?.render()),
        Command::Synth => print!("{}", write_synthetic(&cfg, &cfg.out)?.render()),
        Command::Eval { run } => {
            let dir = run.as_ref().unwrap_or(&cfg.out);
            print!("{}", evaluate_outputs(&cfg, dir)?.render());
        }
        Command::CalibHeading => {
            let inputs = load_inputs(&cfg)?;
            let offset = calibrate_heading(&inputs, cfg.calibration_distance).map_err(PipelineError::Calibration)?;
            println!("heading_offset_deg = {}", offset.to_degrees());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
