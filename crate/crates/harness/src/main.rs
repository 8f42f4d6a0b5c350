use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evossl::config::{resolve_cache_dir, ConfigError, ExperimentConfig};
use evossl::{fetch, report, run, tune};

#[derive(Parser)]
#[command(name = "evossl", version, about = "Evolutionary semi-supervised learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured cell, skipping completed ones.
    Run {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run one tuning stage on the development datasets.
    Tune {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        stage: u8,
        #[arg(short, long)]
        config: PathBuf,
        /// Allow datasets outside the development set (recorded in the output).
        #[arg(long)]
        force: bool,
    },
    /// Build tables and plots from a run directory.
    Report {
        #[arg(short, long)]
        dir: PathBuf,
    },
    /// Download an OpenML dataset into the cache.
    Fetch {
        #[arg(long)]
        openml_id: u64,
        #[arg(long, env = "EVOSSL_CACHE")]
        cache: Option<PathBuf>,
        #[arg(long)]
        offline: bool,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            ConfigError::Io(..) => ExitCode::from(1),
            _ => ExitCode::from(2),
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match run::run_experiment(&cfg) {
                Ok(r) => {
                    println!(
                        "{} cells: {} computed, {} skipped, {} failed",
                        r.total, r.computed, r.skipped, r.failed
                    );
                    ExitCode::from(r.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Tune { stage, config, force } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let non_dev = tune::non_dev_datasets(&cfg);
            if !non_dev.is_empty() && !force {
                eprintln!(
                    "error: tuning refused: {} not in the development set; pass --force to override",
                    non_dev.join(", ")
                );
                return ExitCode::from(2);
            }
            match tune::run_tuning(&cfg, stage, force) {
                Ok(sel) => {
                    println!(
                        "stage {stage}: selected candidate {} (mean MacroF1 {:.4})",
                        sel.selected.candidate, sel.selected.mean_macro_f1
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Report { dir } => match report::write_report(&dir) {
            Ok(t) => {
                println!("{} descriptive rows written to {}", t.descriptive.len(), dir.join("report").display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
        Command::Fetch { openml_id, cache, offline } => {
            let dir = resolve_cache_dir(cache.as_deref());
            match fetch::fetch(openml_id, &dir, offline) {
                Ok(ds) => {
                    println!(
                        "{}: {} rows, {} features, {} classes (cache {})",
                        ds.name,
                        ds.n_rows(),
                        ds.n_features(),
                        ds.n_classes,
                        dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
