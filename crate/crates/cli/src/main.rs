use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use uhe_core::harness::{run_experiment, ExperimentConfig, SUMMARY_FILE, TRACE_FILE};

#[derive(Parser)]
#[command(name = "uhe", version, about = "Bayesian optimization experiments with consistent GP hyperparameter estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, repeat) cell and write traces plus a summary.
    Run(RunArgs),
    /// List the available objectives and strategies.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration; unset fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<String>,
    /// Strategy to run; repeat the flag for several.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    init_points: Option<usize>,
    #[arg(long)]
    mt_factor: Option<f64>,
    #[arg(long)]
    ucb_mult: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    mse_grid: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.objective {
            cfg.objective = v;
        }
        if !self.strategies.is_empty() {
            cfg.strategies = self.strategies;
        }
        if let Some(v) = self.budget {
            cfg.budget = v;
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.init_points {
            cfg.init_points = Some(v);
        }
        if let Some(v) = self.mt_factor {
            cfg.mt_factor = v;
        }
        if let Some(v) = self.ucb_mult {
            cfg.ucb_mult = v;
        }
        if let Some(v) = self.noise_std {
            cfg.noise_std = Some(v);
        }
        if let Some(v) = self.mse_grid {
            cfg.mse_grid = v;
        }
        if let Some(v) = self.out_dir {
            cfg.out_dir = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        Ok(cfg)
    }
}

fn run(args: RunArgs) -> Result<bool> {
    let cfg = args.resolve()?;
    let (summary, _) = run_experiment(&cfg)?;
    println!("{:<16} {:>5} {:>24} {:>24}", "strategy", "runs", "final regret (±SE)", "surrogate MSE (±SE)");
    for s in &summary.strategies {
        println!(
            "{:<16} {:>5} {:>12.5} ± {:<9.5} {:>12.5} ± {:<9.5}",
            s.strategy, s.runs, s.final_regret_mean, s.final_regret_se, s.mse_mean, s.mse_se
        );
    }
    for f in &summary.failures {
        eprintln!("failed: {} run {} (seed {}): {}", f.strategy, f.run_id, f.seed, f.error);
    }
    println!(
        "wrote {} and {}",
        cfg.out_dir.join(TRACE_FILE).display(),
        cfg.out_dir.join(SUMMARY_FILE).display()
    );
    Ok(summary.complete())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            println!("objectives: {}", uhe_core::benchmarks::OBJECTIVE_NAMES.join(", "));
            let names: Vec<&str> = uhe_core::StrategyKind::ALL.iter().map(|k| k.name()).collect();
            println!("strategies: {}", names.join(", "));
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
