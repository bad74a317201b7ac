//! `psps`: generate scenario trees, solve shut-off plans, evaluate and compare them.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use psps_core::cuts::CutFamily;

#[derive(Parser, Debug)]
#[command(name = "psps", version, about = "Wildfire-aware power shut-off planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Scenario sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// Fairness level; `inf` disables the fairness rows.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Cut family: BC, SBC, LC or SMC.
    #[arg(long)]
    pub cuts: Option<CutFamily>,
    /// Relative optimality gap.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Disable restoration of de-energized components.
    #[arg(long)]
    pub no_restoration: bool,
    /// Write every solved model in LP format to this directory.
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample scenario trees and write them as JSON.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve for a nominal plan and write reports.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a saved plan on a scenario tree.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        test_tree: PathBuf,
    },
    /// Plan with and without restoration for several fairness levels.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated fairness levels.
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use psps_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InfeasiblePlan(_) => 3,
                E::Backend(_) | E::SolveStatus { .. } | E::CutGeneration(_) => 4,
                E::Parse(_)
                | E::Validation(_)
                | E::UnknownBus(_)
                | E::UnknownComponent(_)
                | E::InvalidParams(_)
                | E::EmptyInput(_)
                | E::InconsistentTree(_)
                | E::Io(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { common } => commands::generate(&common),
        Command::Solve { common, overrides } => commands::solve(&common, &overrides),
        Command::Evaluate { common, plan, test_tree } => commands::evaluate(&common, &plan, &test_tree),
        Command::Compare { common, overrides, betas } => commands::compare(&common, &overrides, betas),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
