//! Deterministic synthetic market generator.
//!
//! Prices follow a one-factor geometric random walk on weekdays; E, S and G
//! scores follow monthly AR(1) processes around asset-specific levels, and
//! the ESG score is their mean plus its own noise.

use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::frame::{write_prices, write_scores, PriceTable, ScoreRow};
use super::MarketFrame;
use crate::error::{Error, Result};

pub const MIN_ASSETS: usize = 2;
pub const MIN_DAYS: usize = 120;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_assets: usize,
    pub n_days: usize,
    pub start: NaiveDate,
    /// Daily expected log return per asset; drawn from the seed when absent.
    pub drifts: Option<Vec<f64>>,
    /// Daily volatility per asset; drawn from the seed when absent.
    pub vols: Option<Vec<f64>>,
    /// Share of each asset's variance explained by the common factor.
    pub factor_share: f64,
}

impl SynthConfig {
    pub fn new(seed: u64, n_assets: usize, n_days: usize) -> Self {
        Self {
            seed,
            n_assets,
            n_days,
            start: NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date"),
            drifts: None,
            vols: None,
            factor_share: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub prices: DMatrix<f64>,
    /// Monthly score rows, dated the first calendar day of each month.
    pub scores: Vec<ScoreRow>,
}

impl SyntheticMarket {
    /// Writes `prices.csv` and `scores.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let prices = dir.join("prices.csv");
        let scores = dir.join("scores.csv");
        write_prices(File::create(&prices)?, &self.dates, &self.tickers, &self.prices)?;
        write_scores(File::create(&scores)?, &self.scores)?;
        Ok((prices, scores))
    }

    /// Aligns the generated data exactly as CSV ingestion would.
    pub fn to_frame(&self) -> Result<MarketFrame> {
        let table = PriceTable {
            dates: self.dates.clone(),
            tickers: self.tickers.clone(),
            cells: (0..self.tickers.len())
                .map(|i| self.prices.row(i).iter().map(|p| Some(*p)).collect())
                .collect(),
        };
        MarketFrame::align(table, self.scores.clone())
    }
}

fn weekdays(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn month_starts(first: NaiveDate, last: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut d = first.with_day(1).expect("day 1 exists");
    while d <= last {
        out.push(d);
        d = d.checked_add_months(chrono::Months::new(1)).expect("date in range");
    }
    out
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

pub fn generate(cfg: &SynthConfig) -> Result<SyntheticMarket> {
    if cfg.n_assets < MIN_ASSETS {
        return Err(Error::InvalidInput(format!("need at least {MIN_ASSETS} assets")));
    }
    if cfg.n_days < MIN_DAYS {
        return Err(Error::InvalidInput(format!("need at least {MIN_DAYS} days")));
    }
    if !(0.0..1.0).contains(&cfg.factor_share) {
        return Err(Error::InvalidInput("factor_share must be in [0, 1)".into()));
    }
    for (name, v) in [("drifts", &cfg.drifts), ("vols", &cfg.vols)] {
        if v.as_ref().is_some_and(|v| v.len() != cfg.n_assets) {
            return Err(Error::InvalidInput(format!("{name} must have one entry per asset")));
        }
    }

    let n = cfg.n_assets;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let drifts: Vec<f64> = match &cfg.drifts {
        Some(d) => d.clone(),
        None => (0..n).map(|_| rng.random_range(-0.0002..0.0008)).collect(),
    };
    let vols: Vec<f64> = match &cfg.vols {
        Some(v) => v.clone(),
        None => (0..n).map(|_| rng.random_range(0.01..0.025)).collect(),
    };

    let dates = weekdays(cfg.start, cfg.n_days);
    let tickers: Vec<String> = (0..n).map(|i| format!("SYN{i:02}")).collect();
    let load = cfg.factor_share.sqrt();
    let idio = (1.0 - cfg.factor_share).sqrt();

    let mut prices = DMatrix::zeros(n, cfg.n_days);
    let mut level: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..200.0)).collect();
    for t in 0..cfg.n_days {
        if t > 0 {
            let factor: f64 = StandardNormal.sample(&mut rng);
            for i in 0..n {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let shock = vols[i] * (load * factor + idio * eps);
                level[i] *= (drifts[i] + shock).exp();
            }
        }
        for i in 0..n {
            prices[(i, t)] = round_to(level[i], 6).max(1e-6);
        }
    }

    let months = month_starts(dates[0], *dates.last().expect("n_days > 0"));
    let means: Vec<[f64; 3]> = (0..n)
        .map(|_| std::array::from_fn(|_| rng.random_range(20.0..80.0)))
        .collect();
    let mut components: Vec<[f64; 3]> = means.clone();
    let mut scores = Vec::with_capacity(months.len() * n);
    for month in months {
        for i in 0..n {
            for c in 0..3 {
                let eps: f64 = StandardNormal.sample(&mut rng);
                components[i][c] = (means[i][c] + 0.8 * (components[i][c] - means[i][c]) + 3.0 * eps).max(0.0);
            }
            let eps: f64 = StandardNormal.sample(&mut rng);
            let esg = (components[i].iter().sum::<f64>() / 3.0 + 2.0 * eps).max(0.0);
            scores.push(ScoreRow {
                date: month,
                ticker: tickers[i].clone(),
                values: [
                    round_to(esg, 2),
                    round_to(components[i][0], 2),
                    round_to(components[i][1], 2),
                    round_to(components[i][2], 2),
                ],
            });
        }
    }

    Ok(SyntheticMarket {
        dates,
        tickers,
        prices,
        scores,
    })
}
