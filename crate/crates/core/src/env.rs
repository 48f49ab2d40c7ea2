//! Daily-rebalancing trading MDP over a [`MarketFrame`].
//!
//! The agent's action at the close of day `t` is mapped through softmax to
//! long-only weights, which earn the returns from `t` to `t + 1`.

use std::sync::Arc;

use chrono::NaiveDate;
use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::market::{
    estimate_moments_ending, simple_returns, IndicatorPanel, MarketFrame, ScoreKind, INDICATOR_COUNT, WARMUP_DAYS,
};
use crate::mvo::PortfolioWeights;
use crate::ppo::{Environment, Transition};
use crate::reward::{
    compose_reward, differential_update, performance_ratio, DifferentialRatioState, RatioKind, UtilityConfig,
};

/// Daily variances are ~1e-4; this brings Σ features to order one.
pub const SIGMA_SCALE: f64 = 1e4;

/// `N + N(N+1)/2 + N·lookback + 7N + 4N`
pub fn observation_dim(n_assets: usize, lookback: usize) -> usize {
    let n = n_assets;
    n + n * (n + 1) / 2 + n * lookback + INDICATOR_COUNT * n + 4 * n
}

/// Features visible at the close of one day.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub mu: DVector<f64>,
    /// Upper triangle of `SIGMA_SCALE · Σ`, row-major.
    pub sigma_flat: Vec<f64>,
    /// `N × lookback` trailing daily returns, oldest first.
    pub return_lookback: DMatrix<f64>,
    /// Standardized indicators, indicator-major (`7N`).
    pub indicators: Vec<f64>,
    /// Scaled scores, kind-major in [`ScoreKind::ALL`] order (`4N`).
    pub scores: Vec<f64>,
}

impl Observation {
    pub fn dim(&self) -> usize {
        self.mu.len() + self.sigma_flat.len() + self.return_lookback.len() + self.indicators.len() + self.scores.len()
    }

    /// Concatenated feature vector; the lookback block is asset-major.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(self.mu.as_slice());
        out.extend_from_slice(&self.sigma_flat);
        for row in self.return_lookback.row_iter() {
            out.extend(row.iter());
        }
        out.extend_from_slice(&self.indicators);
        out.extend_from_slice(&self.scores);
        out
    }
}

/// Feature standardization frozen from a training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationScaler {
    pub indicator_mean: Vec<f64>,
    pub indicator_std: Vec<f64>,
    /// Cross-sectional mean of each score kind on the reference day.
    pub score_divisors: [f64; 4],
}

impl ObservationScaler {
    /// Leaves every feature unchanged.
    pub fn identity(n_assets: usize) -> Self {
        Self {
            indicator_mean: vec![0.0; INDICATOR_COUNT * n_assets],
            indicator_std: vec![1.0; INDICATOR_COUNT * n_assets],
            score_divisors: [1.0; 4],
        }
    }

    /// Indicator mean/std over days `first..=last`; score divisors from day `first`.
    pub fn fit(frame: &MarketFrame, panel: &IndicatorPanel, first: usize, last: usize) -> Result<Self> {
        let first = first.max(WARMUP_DAYS);
        if last < first || last >= frame.n_days() {
            return Err(Error::InsufficientData(format!(
                "scaler range {first}..={last} is empty or outside the {} available days",
                frame.n_days()
            )));
        }
        let n = frame.n_assets();
        let days = (last - first + 1) as f64;
        let mut mean = Vec::with_capacity(INDICATOR_COUNT * n);
        let mut std = Vec::with_capacity(INDICATOR_COUNT * n);
        for k in 0..INDICATOR_COUNT {
            let m = panel.indicator(k);
            for i in 0..n {
                let xs = m.row(i);
                let xs = xs.columns(first, last - first + 1);
                let mu = xs.sum() / days;
                let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / days;
                mean.push(mu);
                std.push(if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 });
            }
        }
        let score_divisors = ScoreKind::ALL.map(|kind| {
            let avg = frame.scores_at(kind, first).mean();
            if avg > 0.0 {
                avg
            } else {
                1.0
            }
        });
        Ok(Self {
            indicator_mean: mean,
            indicator_std: std,
            score_divisors,
        })
    }
}

/// Builds observations from data dated on or before the observation day.
#[derive(Debug, Clone)]
pub struct ObservationBuilder {
    frame: Arc<MarketFrame>,
    returns: DMatrix<f64>,
    panel: IndicatorPanel,
    scaler: ObservationScaler,
    lookback: usize,
}

impl ObservationBuilder {
    pub fn new(frame: Arc<MarketFrame>, lookback: usize, scaler: ObservationScaler) -> Result<Self> {
        if lookback < 2 {
            return Err(Error::InvalidInput("lookback must be at least 2 days".into()));
        }
        if scaler.indicator_mean.len() != INDICATOR_COUNT * frame.n_assets() {
            return Err(Error::DimensionMismatch {
                expected: INDICATOR_COUNT * frame.n_assets(),
                actual: scaler.indicator_mean.len(),
            });
        }
        let returns = simple_returns(&frame)?;
        let panel = IndicatorPanel::compute(&frame);
        Ok(Self {
            frame,
            returns,
            panel,
            scaler,
            lookback,
        })
    }

    /// Same data with a different scaler (e.g. one fitted on this builder's panel).
    pub fn with_scaler(mut self, scaler: ObservationScaler) -> Result<Self> {
        if scaler.indicator_mean.len() != self.scaler.indicator_mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.scaler.indicator_mean.len(),
                actual: scaler.indicator_mean.len(),
            });
        }
        self.scaler = scaler;
        Ok(self)
    }

    pub fn frame(&self) -> &MarketFrame {
        &self.frame
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn panel(&self) -> &IndicatorPanel {
        &self.panel
    }

    pub fn scaler(&self) -> &ObservationScaler {
        &self.scaler
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    /// Earliest day with full indicator history and `lookback` past returns.
    pub fn first_valid_day(&self) -> usize {
        WARMUP_DAYS.max(self.lookback)
    }

    pub fn dim(&self) -> usize {
        observation_dim(self.frame.n_assets(), self.lookback)
    }

    pub fn build(&self, day: usize) -> Result<Observation> {
        let first_valid = self.first_valid_day();
        if day < first_valid {
            return Err(Error::WarmUp { day, first_valid });
        }
        if day >= self.frame.n_days() {
            return Err(Error::InvalidInput(format!("day {day} is past the end of the data")));
        }
        // Return column j is realized at day j + 1, so columns < day are known.
        let moments = estimate_moments_ending(&self.returns, day, self.lookback, 0.0)?;
        let sigma_flat = linalg::upper_triangle(&(moments.sigma * SIGMA_SCALE));
        let return_lookback = self.returns.columns(day - self.lookback, self.lookback).into_owned();
        let raw = self.panel.at(day)?.flatten();
        let indicators = raw
            .iter()
            .zip(self.scaler.indicator_mean.iter().zip(&self.scaler.indicator_std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        let mut scores = Vec::with_capacity(4 * self.frame.n_assets());
        for kind in ScoreKind::ALL {
            let div = self.scaler.score_divisors[kind.index()];
            scores.extend(self.frame.scores_at(kind, day).iter().map(|s| s / div));
        }
        Ok(Observation {
            mu: moments.mu,
            sigma_flat,
            return_lookback,
            indicators,
            scores,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub utility: UtilityConfig,
    pub ratio_kind: RatioKind,
    pub eta: f64,
    pub r_f: f64,
    pub lookback: usize,
    /// Inclusive date interval episodes are drawn from.
    pub episode_range: (NaiveDate, NaiveDate),
}

/// Diagnostics of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Decision day; the return is realized on the next trading day.
    pub day: usize,
    pub date: NaiveDate,
    pub weights: PortfolioWeights,
    pub portfolio_return: f64,
    /// Differential ratio before the responsibility term.
    pub differential: f64,
    /// Performance ratio per score kind, NaN where undefined.
    pub p_r: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
struct Episode {
    day: usize,
    end: usize,
    ratio: DifferentialRatioState,
    weights: PortfolioWeights,
}

#[derive(Debug, Clone)]
pub struct TradingEnv {
    builder: ObservationBuilder,
    config: EnvConfig,
    episode: Option<Episode>,
}

impl TradingEnv {
    pub fn new(builder: ObservationBuilder, config: EnvConfig) -> Result<Self> {
        if !(config.eta > 0.0 && config.eta <= 1.0) {
            return Err(Error::InvalidInput(format!("eta must lie in (0, 1], got {}", config.eta)));
        }
        if builder.lookback() != config.lookback {
            return Err(Error::InvalidInput("observation lookback disagrees with the environment config".into()));
        }
        if config.episode_range.0 > config.episode_range.1 {
            return Err(Error::InvalidInput("episode range ends before it starts".into()));
        }
        Ok(Self {
            builder,
            config,
            episode: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn builder(&self) -> &ObservationBuilder {
        &self.builder
    }

    pub fn n_assets(&self) -> usize {
        self.builder.frame().n_assets()
    }

    /// Day-index bounds `(first decision day, terminal day)` of the configured range.
    pub fn range_days(&self) -> Result<(usize, usize)> {
        let frame = self.builder.frame();
        let (from, to) = self.config.episode_range;
        let first = frame
            .day_on_or_after(from)
            .ok_or_else(|| Error::InsufficientData(format!("no trading day on or after {from}")))?;
        let last = frame
            .day_on_or_before(to)
            .ok_or_else(|| Error::InsufficientData(format!("no trading day on or before {to}")))?;
        let first = first.max(self.builder.first_valid_day());
        if last <= first {
            return Err(Error::InsufficientData(format!(
                "episode range {from}..{to} leaves no step after the {}-day warm-up",
                self.builder.first_valid_day()
            )));
        }
        Ok((first, last))
    }

    /// Starts an episode at the first trading day on or after `start`,
    /// running to the end of the configured range.
    pub fn reset(&mut self, start: NaiveDate) -> Result<Observation> {
        let frame = self.builder.frame();
        let day = frame
            .day_on_or_after(start)
            .ok_or_else(|| Error::InsufficientData(format!("no trading day on or after {start}")))?;
        let end = frame
            .day_on_or_before(self.config.episode_range.1)
            .ok_or_else(|| Error::InsufficientData("episode range ends before the data".into()))?;
        self.reset_days(day, end)
    }

    /// Starts an episode deciding on days `start..end`; `end` is terminal.
    pub fn reset_days(&mut self, start: usize, end: usize) -> Result<Observation> {
        let obs = self.builder.build(start)?;
        if end <= start || end >= self.builder.frame().n_days() {
            return Err(Error::InvalidInput(format!("episode {start}..{end} has no steps or runs past the data")));
        }
        self.episode = Some(Episode {
            day: start,
            end,
            ratio: DifferentialRatioState::new(self.config.ratio_kind, self.config.eta, self.config.r_f)?,
            weights: PortfolioWeights::uniform(self.n_assets()),
        });
        Ok(obs)
    }

    /// Weights currently held (uniform right after a reset).
    pub fn weights(&self) -> Option<&PortfolioWeights> {
        self.episode.as_ref().map(|e| &e.weights)
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let n = self.n_assets();
        let ep = self.episode.as_mut().ok_or(Error::EpisodeFinished)?;
        if ep.day >= ep.end {
            return Err(Error::EpisodeFinished);
        }
        if action.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: action.len(),
            });
        }
        let weights = PortfolioWeights::softmax(action)?;
        let day = ep.day;
        let frame = self.builder.frame.as_ref();
        let portfolio_return = weights.as_vector().dot(&self.builder.returns.column(day));
        let differential = differential_update(&mut ep.ratio, portfolio_return);
        let utility = &self.config.utility;
        let reward = compose_reward(differential, &weights, &frame.scores_at(utility.score_kind, day), utility)?;
        let p_r = ScoreKind::ALL.map(|k| performance_ratio(&weights, &frame.scores_at(k, day)).unwrap_or(f64::NAN));
        ep.day += 1;
        ep.weights = weights.clone();
        let done = ep.day == ep.end;
        let observation = self.builder.build(ep.day)?;
        Ok(StepOutcome {
            observation,
            reward,
            done,
            info: StepInfo {
                day,
                date: frame.dates()[day],
                weights,
                portfolio_return,
                differential,
                p_r,
            },
        })
    }
}

/// Training wrapper: each episode covers `episode_days` decisions starting
/// on a uniformly drawn day inside the configured range (or the whole range
/// when it is shorter).
#[derive(Debug, Clone)]
pub struct EpisodeSampler {
    env: TradingEnv,
    first: usize,
    last: usize,
    episode_days: usize,
}

impl EpisodeSampler {
    pub fn new(env: TradingEnv, episode_days: usize) -> Result<Self> {
        if episode_days == 0 {
            return Err(Error::InvalidInput("episodes need at least one day".into()));
        }
        let (first, last) = env.range_days()?;
        Ok(Self {
            env,
            first,
            last,
            episode_days,
        })
    }

    pub fn env(&self) -> &TradingEnv {
        &self.env
    }
}

impl Environment for EpisodeSampler {
    fn obs_dim(&self) -> usize {
        self.env.builder.dim()
    }

    fn action_dim(&self) -> usize {
        self.env.n_assets()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let (start, end) = if self.last - self.first <= self.episode_days {
            (self.first, self.last)
        } else {
            let start = rng.random_range(self.first..=self.last - self.episode_days);
            (start, start + self.episode_days)
        };
        debug!("episode {start}..{end}");
        Ok(self.env.reset_days(start, end)?.to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        let out = self.env.step(action)?;
        Ok(Transition {
            observation: out.observation.to_vec(),
            reward: out.reward,
            done: out.done,
        })
    }
}
