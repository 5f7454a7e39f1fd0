//! `fplab`: run fingerprinting and Assouad experiments from config files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fplab::lab::{self, LabError, RunOutput, EXIT_CHECK_FAILED, EXIT_PASS, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "fplab", version, about = "Seeded Monte Carlo checks of private estimation lower bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment once per value of a numeric config key.
    Sweep {
        config: PathBuf,
        /// Config key to vary.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(clap::Args)]
struct Common {
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self, path: &PathBuf) -> Result<lab::ExperimentConfig, LabError> {
        let seed = self.seed.map(|s| s.to_string());
        let overrides: Vec<(&str, &str)> = seed.as_deref().map(|s| ("seed", s)).into_iter().collect();
        let mut cfg = lab::load_config(path, &overrides)?;
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn summarize(label: &str, out: &RunOutput) {
    let r = &out.report;
    let failed: Vec<&str> = r.failures().map(|m| m.name.as_str()).collect();
    if failed.is_empty() {
        println!("{label}: PASS ({} metrics, {:.2}s)", r.metrics.len(), r.runtime_secs);
    } else {
        println!("{label}: FAIL ({})", failed.join(", "));
    }
}

fn execute(cli: Cli) -> Result<i32, LabError> {
    match cli.command {
        Command::Run { config, common } => {
            let cfg = common.load(&config)?;
            let out = lab::run_with_workers(&cfg, common.workers)?;
            let dir = lab::default_out_dir(&cfg);
            lab::write_outputs(&dir, &out)?;
            summarize(cfg.experiment.as_str(), &out);
            println!("wrote {}", dir.display());
            Ok(out.exit_code())
        }
        Command::Sweep {
            config,
            axis,
            values,
            common,
        } => {
            let cfg = common.load(&config)?;
            let values = lab::parse_values(&values)?;
            let points = lab::sweep(&cfg, &axis, &values, common.workers)?;
            let dir = lab::default_out_dir(&cfg);
            lab::write_sweep(&dir, &axis, &points)?;
            for p in &points {
                summarize(&format!("{axis}={}", p.value), &p.output);
            }
            println!("wrote {}", dir.display());
            let all = points.iter().all(|p| p.output.report.all_pass);
            Ok(if all { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("fplab: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
