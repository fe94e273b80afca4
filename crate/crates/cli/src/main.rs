use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use implreg::config::presets;
use implreg::{detsign, matfac_run, plot, tenfac_sweep};
use implreg::{DetsignConfig, ExperimentConfig, PlotConfig, PlotStyle};

/// Seeds resolve as flag, then IMPLREG_SEED, then the config file.
#[derive(Parser)]
#[command(name = "implreg", version, about = "Deep matrix and tensor factorization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long, env = "IMPLREG_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Matrix factorization run or sweep (kind matfac-run / matfac-sweep).
    Matfac {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo estimate of P(det > 0) for random 2x2 matrices.
    Detsign {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, env = "IMPLREG_SEED", default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tensor completion sweep (kind tenfac-sweep).
    Tenfac {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Render CSV output as SVG.
    Plot {
        #[arg(long = "input", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        style: PlotStyle,
        #[arg(long)]
        out: PathBuf,
        /// Entry column for loss-vs-entry (default w11).
        #[arg(long)]
        column: Option<String>,
    },
    /// Any config file, dispatched on its `kind`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print a built-in config as JSON.
    Preset {
        /// Omit to list the available names.
        name: Option<String>,
    },
}

fn jobs(n: Option<usize>) -> usize {
    n.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)).max(1)
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.override_seed(s);
    }
    Ok(cfg)
}

fn write_detsign(cfg: &DetsignConfig) -> anyhow::Result<()> {
    let rows = detsign::run_detsign(cfg)?;
    match &cfg.output {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            detsign::write_rows(&rows, file)?;
        }
        None => detsign::write_rows(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn execute(cfg: ExperimentConfig, jobs: usize) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match cfg {
        ExperimentConfig::MatfacRun(c) | ExperimentConfig::MatfacSweep(c) => {
            let records = matfac_run::run_matfac(&c, jobs)?;
            for r in &records {
                let s = &r.summary;
                let status = s.diverged.as_deref().unwrap_or(if s.converged { "converged" } else { "iteration cap" });
                writeln!(
                    out,
                    "{}  iters={} loss={:.3e} |entry|={:.4} {status}",
                    r.run_id, s.iterations, s.final_loss, s.final_entry
                )?;
            }
            writeln!(out, "summary: {}", matfac_run::summary_path(&c.output).display())?;
        }
        ExperimentConfig::TenfacSweep(c) => {
            let rows = tenfac_sweep::run_tenfac_sweep(&c, jobs)?;
            for r in rows.iter().filter(|r| r.row == "median") {
                let std = r.init_std.map(|s| format!("{s:e}")).unwrap_or_else(|| "-".into());
                let rank = r.est_rank.map(|k| k.to_string()).unwrap_or_else(|| "-".into());
                writeln!(
                    out,
                    "{:<5} n_obs={:<5} init={std:<6} error={:.4e} rank={rank}",
                    r.method, r.n_obs, r.recon_error
                )?;
            }
            writeln!(out, "wrote {}", c.output.display())?;
        }
        ExperimentConfig::Detsign(c) => write_detsign(&c)?,
        ExperimentConfig::Plot(c) => plot::emit_plot(&c)?,
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Matfac { config, common } => {
            let cfg = load(&config, common.seed)?;
            if !matches!(cfg, ExperimentConfig::MatfacRun(_) | ExperimentConfig::MatfacSweep(_)) {
                bail!("{}: expected kind matfac-run or matfac-sweep", config.display());
            }
            execute(cfg, jobs(common.jobs))
        }
        Command::Tenfac { config, common } => {
            let cfg = load(&config, common.seed)?;
            if !matches!(cfg, ExperimentConfig::TenfacSweep(_)) {
                bail!("{}: expected kind tenfac-sweep", config.display());
            }
            execute(cfg, jobs(common.jobs))
        }
        Command::Run { config, common } => execute(load(&config, common.seed)?, jobs(common.jobs)),
        Command::Detsign { samples, depth, seed, out } => {
            write_detsign(&DetsignConfig { samples, depth, seed, output: out })
        }
        Command::Plot { inputs, style, out, column } => {
            Ok(plot::emit_plot(&PlotConfig { inputs, style, output: out, column })?)
        }
        Command::Preset { name: None } => {
            presets::NAMES.iter().for_each(|n| println!("{n}"));
            Ok(())
        }
        Command::Preset { name: Some(name) } => match ExperimentConfig::preset(&name) {
            Some(cfg) => {
                println!("{}", cfg.to_json());
                Ok(())
            }
            None => bail!("unknown preset `{name}`; known: {}", presets::NAMES.join(", ")),
        },
    }
}
