use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use log::{info, warn};
use respo::backtest::{
    compare_strategies, line_chart_svg, run_backtest, BacktestReport, MvoKind, MvoSettings, MvoStrategy, PolicyStrategy,
    Strategy, UniformStrategy,
};
use respo::env::{EnvConfig, EpisodeSampler, ObservationBuilder, ObservationScaler, TradingEnv};
use respo::market::synth::{generate, SynthConfig};
use respo::market::{estimate_moments_ending, ingest_csv, simple_returns, MarketFrame};
use respo::mvo::frontier_sweep;
use respo::ppo::{train as train_policy, Checkpoint};
use respo::reward::{RatioKind, UtilityMode};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, StrategyKind};
use crate::CliError;

/// Everything besides the network needed to rebuild a policy's observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub tickers: Vec<String>,
    pub env: EnvConfig,
    pub scaler: ObservationScaler,
    pub episode_days: usize,
}

fn load_frame(cfg: &RunConfig) -> Result<Arc<MarketFrame>, CliError> {
    let frame = ingest_csv(&cfg.data.prices, &cfg.data.scores).map_err(CliError::Data)?;
    Ok(Arc::new(frame))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(e.into()))
}

pub fn synth(seed: u64, n_assets: usize, n_days: usize, dir: &Path) -> Result<(), CliError> {
    let market = generate(&SynthConfig::new(seed, n_assets, n_days))?;
    let (prices, scores) = market.write(dir)?;
    println!("{}", prices.display());
    println!("{}", scores.display());
    Ok(())
}

pub fn ingest_check(cfg: &RunConfig) -> Result<(), CliError> {
    let frame = load_frame(cfg)?;
    let dates = frame.dates();
    println!("assets: {}", frame.n_assets());
    println!("trading days: {}", frame.n_days());
    println!("first day: {}", dates[0]);
    println!("last day: {}", dates[dates.len() - 1]);
    println!("tickers: {}", frame.tickers().join(" "));
    Ok(())
}

fn env_config(cfg: &RunConfig) -> Result<EnvConfig, CliError> {
    Ok(EnvConfig {
        utility: cfg.strategy.utility_config()?,
        ratio_kind: cfg.strategy.objective,
        eta: cfg.strategy.eta,
        r_f: cfg.strategy.r_f,
        lookback: cfg.lookback.observation,
        episode_range: (cfg.dates.train_start, cfg.dates.train_end),
    })
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.strategy.kind != StrategyKind::Rl {
        return Err(CliError::Config(format!(
            "train needs strategy kind 'rl', configured '{}'",
            cfg.strategy.kind
        )));
    }
    let frame = load_frame(cfg)?;
    let env_cfg = env_config(cfg)?;
    let builder = ObservationBuilder::new(frame.clone(), env_cfg.lookback, ObservationScaler::identity(frame.n_assets()))?;
    let env = TradingEnv::new(builder.clone(), env_cfg)?;
    let (first, last) = env.range_days().map_err(CliError::Data)?;
    let scaler = ObservationScaler::fit(&frame, builder.panel(), first, last)?;
    let builder = builder.with_scaler(scaler.clone())?;
    let env = TradingEnv::new(builder, env_cfg)?;
    let mut sampler = EpisodeSampler::new(env, cfg.rl.episode_days)?;

    let mut ppo = cfg.rl.ppo.clone();
    ppo.seed = cfg.seed;
    info!(
        "training on {} assets, days {first}..={last}, {} steps",
        frame.n_assets(),
        ppo.total_steps
    );
    let trained = train_policy(&mut sampler, &ppo)?;

    create_dir(&cfg.output_dir)?;
    let meta = PolicyMeta {
        tickers: frame.tickers().to_vec(),
        env: env_cfg,
        scaler,
        episode_days: cfg.rl.episode_days,
    };
    let path = cfg.checkpoint_path();
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    Checkpoint::new(&trained.params, &ppo, meta).save(&path)?;
    let log_path = cfg.output_dir.join("training_log.csv");
    trained.log.save(&log_path)?;
    println!("{}", path.display());
    println!("{}", log_path.display());
    Ok(())
}

fn policy_name(env: &EnvConfig) -> String {
    match env.utility.mode {
        UtilityMode::None => format!("rl/{}/none", env.ratio_kind),
        mode => format!("rl/{}/{mode}-{}", env.ratio_kind, env.utility.score_kind),
    }
}

fn build_strategy(cfg: &RunConfig, kind: StrategyKind, frame: &Arc<MarketFrame>) -> Result<Box<dyn Strategy>, CliError> {
    let mut run_cfg = cfg.clone();
    run_cfg.strategy.kind = kind;
    run_cfg.validate()?;
    let s = &cfg.strategy;
    Ok(match kind {
        StrategyKind::Uniform => Box::new(UniformStrategy::new(frame.n_assets())),
        StrategyKind::MvoExact | StrategyKind::MvoRelaxed => {
            let settings = MvoSettings {
                kind: if kind == StrategyKind::MvoExact {
                    MvoKind::Exact
                } else {
                    MvoKind::Relaxed
                },
                lookback: cfg.lookback.moments,
                r_f: s.r_f,
                lambda: s.lambda,
                use_semi: s.objective == RatioKind::Sortino,
                utility: s.utility_config()?,
            };
            Box::new(MvoStrategy::new(frame.clone(), settings)?)
        }
        StrategyKind::Rl => {
            let path = cfg.checkpoint_path();
            let ck: Checkpoint<PolicyMeta> = Checkpoint::load(&path)?;
            if ck.meta.tickers != frame.tickers() {
                return Err(CliError::Data(respo::Error::Alignment(format!(
                    "checkpoint {} was trained on tickers {:?}, data has {:?}",
                    path.display(),
                    ck.meta.tickers,
                    frame.tickers()
                ))));
            }
            let builder = ObservationBuilder::new(frame.clone(), ck.meta.env.lookback, ck.meta.scaler.clone())?;
            Box::new(PolicyStrategy::new(policy_name(&ck.meta.env), ck.params()?, builder)?)
        }
    })
}

fn report_file(dir: &Path, strategy: &str) -> PathBuf {
    dir.join(format!("report_{}.csv", strategy.replace('/', "_")))
}

pub fn backtest(cfg: &RunConfig, runs: &[StrategyKind]) -> Result<(), CliError> {
    let frame = load_frame(cfg)?;
    let mut strategies = runs
        .iter()
        .map(|kind| build_strategy(cfg, *kind, &frame))
        .collect::<Result<Vec<_>, _>>()?;
    // A common first decision day keeps every report on the same dates.
    let warm = strategies.iter().map(|s| s.first_valid_day()).max().unwrap_or(0);
    let start = match frame.day_on_or_after(cfg.dates.eval_start) {
        Some(day) => frame.dates()[day.max(warm).min(frame.n_days() - 1)],
        None => cfg.dates.eval_start,
    };
    let range: (NaiveDate, NaiveDate) = (start, cfg.dates.eval_end);

    create_dir(&cfg.output_dir)?;
    let mut reports: Vec<BacktestReport> = Vec::with_capacity(strategies.len());
    for strategy in strategies.iter_mut() {
        let report = run_backtest(strategy.as_mut(), &frame, range)?;
        if !report.failures.is_empty() {
            warn!(
                "{}: {} of {} days fell back to uniform weights",
                report.strategy,
                report.failures.len(),
                report.returns.len()
            );
        }
        let path = report_file(&cfg.output_dir, &report.strategy);
        report.write_csv(&path)?;
        println!("{}", path.display());
        reports.push(report);
    }
    let files = compare_strategies(&reports, &cfg.output_dir, cfg.svg)?;
    print_summary(&reports);
    println!("{}", files.summary.display());
    Ok(())
}

fn print_summary(reports: &[BacktestReport]) {
    println!(
        "{:<36} {:>12} {:>12} {:>12}",
        "strategy", "annualized", "max_dd", "mean_p_r"
    );
    for r in reports {
        println!(
            "{:<36} {:>12.4} {:>12.4} {:>12.4}",
            r.strategy, r.annualized_return, r.max_drawdown, r.mean_p_r[0]
        );
    }
}

pub fn frontier(cfg: &RunConfig) -> Result<(), CliError> {
    let frame = load_frame(cfg)?;
    let returns = simple_returns(&frame)?;
    let date = cfg.frontier.date.unwrap_or(cfg.dates.eval_start);
    let day = frame
        .day_on_or_before(date)
        .or_else(|| frame.day_on_or_after(date))
        .ok_or_else(|| CliError::Data(respo::Error::InsufficientData("no trading days".into())))?;
    let moments = estimate_moments_ending(&returns, day, cfg.lookback.moments, cfg.strategy.r_f)?;
    let scores = frame.scores_at(cfg.strategy.score_kind, day);
    let points = cfg.frontier.points;
    let free = frontier_sweep(&moments, None, &scores, points)?;
    let floored = match frontier_sweep(&moments, Some(cfg.frontier.floor_factor), &scores, points) {
        Ok(pts) => pts,
        Err(respo::Error::EmptyFrontier) => {
            warn!(
                "no portfolio reaches {} times the equal-weight {} score; floored frontier is empty",
                cfg.frontier.floor_factor, cfg.strategy.score_kind
            );
            Vec::new()
        }
        Err(e) => return Err(e.into()),
    };

    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("frontier.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Data(std::io::Error::other(e).into()))?;
    let io = |e: csv::Error| CliError::Data(std::io::Error::other(e).into());
    w.write_record(["curve", "target", "risk", "return"]).map_err(io)?;
    for (curve, pts) in [("unconstrained", &free), ("floored", &floored)] {
        for p in pts.iter() {
            w.write_record([curve, &p.target.to_string(), &p.risk.to_string(), &p.ret.to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::Data(e.into()))?;
    println!("{}", path.display());
    info!(
        "frontier on {}: {} unconstrained points, {} floored points",
        frame.dates()[day],
        free.len(),
        floored.len()
    );

    if cfg.svg {
        let series = vec![
            ("unconstrained".to_string(), free.iter().map(|p| (p.risk, p.ret)).collect()),
            (
                format!("{} x {} floor", cfg.frontier.floor_factor, cfg.strategy.score_kind),
                floored.iter().map(|p| (p.risk, p.ret)).collect(),
            ),
        ];
        let svg = cfg.output_dir.join("frontier.svg");
        std::fs::write(&svg, line_chart_svg("Efficient frontier (risk vs return)", &series))
            .map_err(|e| CliError::Data(e.into()))?;
        println!("{}", svg.display());
    }
    Ok(())
}

pub fn compare(paths: &[PathBuf], dir: &Path, svg: bool) -> Result<(), CliError> {
    if paths.is_empty() {
        return Err(CliError::Config("compare needs at least one report CSV".into()));
    }
    let reports = paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            let name = stem.strip_prefix("report_").unwrap_or(stem);
            BacktestReport::read_csv(p, name)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let files = compare_strategies(&reports, dir, svg)?;
    print_summary(&reports);
    println!("{}", files.summary.display());
    Ok(())
}
