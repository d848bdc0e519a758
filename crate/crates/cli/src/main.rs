mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use behav_core::qnet::ModelKind;
use clap::{Parser, Subcommand, ValueEnum};

/// Behavior-rich highway simulation, driver classification and graph Q-learning.
#[derive(Debug, Parser)]
#[command(name = "behav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate traffic and write a JSONL trajectory log.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to `env.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for aggressive driver parameters; writes `params.toml` and `calibration.csv`.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to `calibration.rng_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a Q-network; writes checkpoints and reward CSVs.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Defaults to `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Greedy evaluation of a checkpoint; writes a report CSV.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to `eval.episodes`.
        #[arg(long)]
        episodes: Option<usize>,
        /// First episode seed; defaults to `eval.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluate only this scenario instead of all three.
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        /// Vehicle counts to evaluate; defaults to `env.vehicle_count`.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Model label written to the report; defaults to the model kind.
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every vehicle in a trajectory log; writes a CSV.
    Classify {
        #[arg(long)]
        traj: PathBuf,
        /// Defaults to `env.d_min`.
        #[arg(long)]
        d_min: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Gcn,
    Mlp,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Gcn => ModelKind::Gcn,
            ModelArg::Mlp => ModelKind::Mlp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Default,
    Conservative,
    Aggressive,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BEHAV_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, seed, out } => commands::simulate(config.as_deref(), seed, &out),
        Command::Calibrate { config, seed, out } => commands::calibrate(config.as_deref(), seed, &out),
        Command::Train { config, model, seed, out_dir } => {
            commands::train(config.as_deref(), model.into(), seed, &out_dir)
        }
        Command::Evaluate { checkpoint, config, episodes, seed, scenario, n, label, out } => {
            let scenario = scenario.map(|s| match s {
                ScenarioArg::Default => behav_core::env::Scenario::Default,
                ScenarioArg::Conservative => behav_core::env::Scenario::Conservative,
                ScenarioArg::Aggressive => behav_core::env::Scenario::Aggressive,
            });
            let opts = commands::EvaluateOptions { episodes, seed, scenario, ns: n, label };
            commands::evaluate(&checkpoint, config.as_deref(), &opts, &out)
        }
        Command::Classify { traj, d_min, config, out } => commands::classify(&traj, d_min, config.as_deref(), &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
