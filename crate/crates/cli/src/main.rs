use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bclp_cli::runner::{run_init, run_metrics, run_phantom, MetricsInput};
use bclp_cli::{run_single, run_sweep, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "bclp", version, about = "Band-constraint Lp-norm sinogram optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for `target.kind = random`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a setting, e.g. `--set loss.p=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured target field and its render.
    Phantom(Common),
    /// Write the starting sinogram and its dose.
    Init(Common),
    /// Optimize a sinogram and write all outputs.
    Run(Common),
    /// Run once per `sweep.values` entry and write a summary.
    Sweep(Common),
    /// Evaluate metrics of an existing dose or sinogram file.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "sinogram", required_unless_present = "sinogram")]
        dose: Option<PathBuf>,
        #[arg(long)]
        sinogram: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for item in &common.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::config("--set", format!("expected KEY=VALUE, got {item:?}")))?;
        cfg.set(k.trim(), v).map_err(|e| CliError::config("--set", e))?;
    }
    if let Some(seed) = common.seed {
        cfg.target.seed = seed;
    }
    cfg.validate().map_err(|e| CliError::config("config", e))?;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Phantom(c) => {
            let cfg = load(&c)?;
            run_phantom(&cfg, &c.out)?;
        }
        Command::Init(c) => {
            let cfg = load(&c)?;
            run_init(&cfg, &c.out)?;
        }
        Command::Run(c) => {
            let cfg = load(&c)?;
            let s = run_single(&cfg, &c.out)?;
            println!(
                "{}: loss {} after {} iterations, violation fraction {}",
                s.termination, s.final_loss, s.iterations, s.violation_fraction
            );
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            if cfg.sweep.is_none() {
                return Err(CliError::config("sweep", "no sweep.param configured"));
            }
            let rows = run_sweep(&cfg, &c.out)?;
            for r in &rows {
                match &r.outcome {
                    Ok(s) => println!(
                        "{}: {} loss {} ({} iterations)",
                        r.value, s.termination, s.final_loss, s.iterations
                    ),
                    Err(e) => println!("{}: error: {e}", r.value),
                }
            }
            if rows.iter().any(|r| r.outcome.is_err()) {
                eprintln!("some sweep runs failed, see {}", c.out.join("summary.csv").display());
            }
        }
        Command::Metrics { common, dose, sinogram } => {
            let cfg = load(&common)?;
            let input = match (dose, sinogram) {
                (Some(d), _) => MetricsInput::Dose(d),
                (None, Some(s)) => MetricsInput::Sinogram(s),
                (None, None) => unreachable!("clap requires one input"),
            };
            let eval = run_metrics(&cfg, &input, &common.out)?;
            for (name, value, flags) in &eval.rows {
                println!("{name} = {value} {flags}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
