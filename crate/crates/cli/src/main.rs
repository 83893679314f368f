//! `ssgcn` command-line entry point.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ssgcn::runner::{build_attack_cache, format_table, read_rows, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ssgcn", version, about = "GCN training with self-supervision and adversarial defense")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment and write `<name>.runs.jsonl` and `<name>.agg.csv`.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Seeds trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print a Markdown comparison table from aggregate CSV files.
    Report {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Points by which a flagged mean must beat plain GCN.
        #[arg(long, default_value_t = 0.0)]
        min_gain: f64,
    },
    /// Precompute evaluation perturbations into `attack.cache_dir`.
    AttackCache {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("reading config {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { config, jobs } => {
            let cfg = load(&config)?;
            log::info!("{}: {} on {} over {} seeds", cfg.name, cfg.label(), cfg.dataset.display(), cfg.seeds.len());
            let report = run_experiment(&cfg, jobs)?;
            let row = &report.row;
            if row.completed == 0 {
                bail!("{}: every seed failed", cfg.name);
            }
            println!(
                "{} {} {}: {:.2} ± {:.2} over {} seeds ({} failed) in {:.1}s",
                row.dataset,
                row.scheme,
                row.task,
                100.0 * row.mean,
                100.0 * row.std,
                row.completed,
                row.failed,
                row.wall_time_s
            );
            if let (Some(m), Some(s)) = (row.attacked_mean, row.attacked_std) {
                println!("attacked: {:.2} ± {:.2}", 100.0 * m, 100.0 * s);
            }
            println!("wrote {} and {}", cfg.runs_path().display(), cfg.aggregate_path().display());
        }
        Command::Report { csv, min_gain } => {
            let rows = read_rows(&csv)?;
            print!("{}", format_table(&rows, min_gain)?);
        }
        Command::AttackCache { config, jobs } => {
            let cfg = load(&config)?;
            for path in build_attack_cache(&cfg, jobs)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}
