use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdridge::experiment::{run_bias_variance_sweep, run_iterative_experiment, run_sketch_accuracy, SweepConfig};
use fdridge::par::{with_jobs, Exec};
use fdridge::Result;

#[derive(Parser)]
#[command(name = "fdridge", version, about = "Frequent Directions ridge regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV; `-` or absent (with no `out` in the config) writes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the experiment grid.
    #[arg(long)]
    jobs: Option<usize>,
    /// Base seed; overrides FDRIDGE_SEED and the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Run every loop on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Bias, variance and MSE of each method over the gamma grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also write per-trial rows next to the output (`<out>.raw.csv`).
        #[arg(long)]
        raw: bool,
    },
    /// Convergence of the iterative solvers against the exact solution.
    Iterate {
        #[command(flatten)]
        common: Common,
        /// Number of iterations; defaults to `iterations` in the config.
        #[arg(long)]
        t: Option<usize>,
    },
    /// Spectral covariance error of each sketch against its bound.
    SketchAcc {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<(SweepConfig, Option<PathBuf>, Exec)> {
    let mut cfg = SweepConfig::from_file(&common.config)?;
    cfg.apply_env()?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().or_else(|| cfg.out.clone());
    let exec = if common.sequential { Exec::Sequential } else { Exec::Parallel };
    Ok((cfg, out, exec))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) if p != Path::new("-") => fs::write(p, text)?,
        _ => print!("{text}"),
    }
    Ok(())
}

fn raw_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.raw.csv"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep { common, raw } => {
            let (cfg, out, exec) = load(&common)?;
            let result = with_jobs(common.jobs, || run_bias_variance_sweep(&cfg, exec))?;
            emit(out.as_deref(), &result.to_csv())?;
            if raw {
                match out.as_deref().filter(|p| *p != Path::new("-")) {
                    Some(p) => fs::write(raw_path(p), result.raw_csv())?,
                    None => print!("{}", result.raw_csv()),
                }
            }
        }
        Command::Iterate { common, t } => {
            let (cfg, out, exec) = load(&common)?;
            let t = t.unwrap_or(cfg.iterations);
            let result = with_jobs(common.jobs, || run_iterative_experiment(&cfg, t, exec))?;
            emit(out.as_deref(), &result.to_csv())?;
        }
        Command::SketchAcc { common } => {
            let (cfg, out, exec) = load(&common)?;
            let result = with_jobs(common.jobs, || run_sketch_accuracy(&cfg, exec))?;
            emit(out.as_deref(), &result.to_csv())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fdridge: {e}");
            ExitCode::FAILURE
        }
    }
}
