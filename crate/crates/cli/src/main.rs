//! `respo`: synthetic data, policy training, backtests and efficient frontiers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use respo::market::ScoreKind;
use respo::reward::{RatioKind, UtilityMode};

use config::{RunConfig, StrategyKind};

/// Exit codes: 2 configuration, 3 data, 4 solver or training failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(respo::Error),
    #[error("{0}")]
    Failure(respo::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Failure(_) => 4,
        }
    }
}

impl From<respo::Error> for CliError {
    fn from(err: respo::Error) -> Self {
        use respo::Error as E;
        match err {
            E::InvalidInput(msg) => CliError::Config(msg),
            E::DimensionMismatch { .. } => CliError::Config(err.to_string()),
            E::Parse { .. }
            | E::Alignment(_)
            | E::InsufficientData(_)
            | E::WarmUp { .. }
            | E::Io(_)
            | E::UndefinedScore
            | E::DegenerateMarket
            | E::EmptyFrontier => CliError::Data(err),
            _ => CliError::Failure(err),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "respo", version, about = "Responsible portfolio optimization: mean-variance and PPO strategies")]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config file).
    #[arg(short, long, global = true, env = "RESPO_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Command-line overrides of the configuration file.
#[derive(Debug, Clone, Default, Args)]
struct Overrides {
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyKind>,
    #[arg(long)]
    objective: Option<RatioKind>,
    #[arg(long)]
    utility: Option<UtilityMode>,
    #[arg(long)]
    score_kind: Option<ScoreKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    total_steps: Option<usize>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Render SVG charts next to the CSV outputs.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic price and score data set.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        n_assets: usize,
        #[arg(long, default_value_t = 2000)]
        n_days: usize,
        /// Defaults to the output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Ingest and align the configured data and print a summary.
    IngestCheck {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train a PPO policy over the training range.
    Train {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Backtest strategies over the evaluation range.
    Backtest {
        #[command(flatten)]
        overrides: Overrides,
        /// Strategies to run (repeatable); defaults to the configured one.
        #[arg(long = "run", value_enum)]
        runs: Vec<StrategyKind>,
    },
    /// Unconstrained and score-floored efficient frontiers on one day.
    Frontier {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        floor_factor: Option<f64>,
    },
    /// Print the effective configuration (file plus overrides) as TOML.
    ShowConfig {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Combine existing report CSVs into summary tables and charts.
    Compare {
        reports: Vec<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
}

fn load_config(cli: &Cli, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    let o = overrides;
    if let Some(v) = &o.prices {
        cfg.data.prices = v.clone();
    }
    if let Some(v) = &o.scores {
        cfg.data.scores = v.clone();
    }
    if let Some(v) = o.strategy {
        cfg.strategy.kind = v;
    }
    if let Some(v) = o.objective {
        cfg.strategy.objective = v;
    }
    if let Some(v) = o.utility {
        cfg.strategy.utility = v;
    }
    if let Some(v) = o.score_kind {
        cfg.strategy.score_kind = v;
    }
    if let Some(v) = o.alpha {
        cfg.strategy.alpha = v;
    }
    if let Some(v) = o.lambda {
        cfg.strategy.lambda = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.total_steps {
        cfg.rl.ppo.total_steps = v;
    }
    if let Some(v) = &o.checkpoint {
        cfg.rl.checkpoint = v.clone();
    }
    cfg.svg |= o.svg;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth {
            seed,
            n_assets,
            n_days,
            out_dir,
        } => {
            let dir = out_dir
                .clone()
                .or_else(|| cli.output_dir.clone())
                .unwrap_or_else(|| RunConfig::default().output_dir);
            commands::synth(*seed, *n_assets, *n_days, &dir)
        }
        Command::IngestCheck { overrides } => commands::ingest_check(&load_config(&cli, overrides)?),
        Command::Train { overrides } => {
            let cfg = load_config(&cli, overrides)?;
            cfg.validate()?;
            commands::train(&cfg)
        }
        Command::Backtest { overrides, runs } => {
            let cfg = load_config(&cli, overrides)?;
            let runs = if runs.is_empty() { vec![cfg.strategy.kind] } else { runs.clone() };
            commands::backtest(&cfg, &runs)
        }
        Command::Frontier { overrides, floor_factor } => {
            let mut cfg = load_config(&cli, overrides)?;
            if let Some(f) = floor_factor {
                cfg.frontier.floor_factor = *f;
            }
            cfg.validate()?;
            commands::frontier(&cfg)
        }
        Command::ShowConfig { overrides } => {
            let cfg = load_config(&cli, overrides)?;
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
        Command::Compare { reports, svg } => {
            let dir = cli.output_dir.clone().unwrap_or_else(|| match &cli.config {
                Some(path) => RunConfig::load(path).map(|c| c.output_dir).unwrap_or_default(),
                None => RunConfig::default().output_dir,
            });
            commands::compare(reports, &dir, *svg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
