//! Strategy backtests, evaluation metrics, and comparison outputs.
//!
//! Weights chosen at the close of day `t` earn the returns from `t` to
//! `t + 1`; each report row is dated on the day the return is realized.

use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::env::ObservationBuilder;
use crate::error::{Error, Result};
use crate::market::{estimate_moments_ending, simple_returns, MarketFrame, ScoreKind};
use crate::mvo::{tangency_exact, tangency_relaxed, PortfolioWeights, ResponsibilityConfig};
use crate::ppo::PolicyParams;
use crate::reward::{performance_ratio, UtilityConfig, UtilityMode};

pub const TRADING_DAYS: f64 = 252.0;
pub const HISTOGRAM_BINS: usize = 20;

/// Produces long-only weights for a decision day from data up to that day.
pub trait Strategy {
    fn name(&self) -> String;
    /// Earliest day the strategy can decide on.
    fn first_valid_day(&self) -> usize;
    fn weights(&mut self, day: usize) -> Result<PortfolioWeights>;
}

#[derive(Debug, Clone)]
pub struct UniformStrategy {
    n_assets: usize,
}

impl UniformStrategy {
    pub fn new(n_assets: usize) -> Self {
        Self { n_assets }
    }
}

impl Strategy for UniformStrategy {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn first_valid_day(&self) -> usize {
        0
    }

    fn weights(&mut self, _day: usize) -> Result<PortfolioWeights> {
        Ok(PortfolioWeights::uniform(self.n_assets))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MvoKind {
    /// Exact tangency via the `y = κw` transformation.
    Exact,
    /// Risk-aversion form with coefficient λ.
    Relaxed,
}

impl std::fmt::Display for MvoKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MvoKind::Exact => "mvo-exact",
            MvoKind::Relaxed => "mvo-relaxed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvoSettings {
    pub kind: MvoKind,
    pub lookback: usize,
    pub r_f: f64,
    pub lambda: f64,
    /// Downside semicovariance instead of covariance (the Sortino analogue).
    pub use_semi: bool,
    pub utility: UtilityConfig,
}

/// Mean-variance strategy re-solved every day on a rolling window.
#[derive(Debug, Clone)]
pub struct MvoStrategy {
    frame: Arc<MarketFrame>,
    returns: DMatrix<f64>,
    settings: MvoSettings,
    resp: ResponsibilityConfig,
}

impl MvoStrategy {
    /// Rejects the multiplicative utility, which breaks convexity of the program.
    pub fn new(frame: Arc<MarketFrame>, settings: MvoSettings) -> Result<Self> {
        let resp = match settings.utility.mode {
            UtilityMode::None => ResponsibilityConfig::disabled(),
            UtilityMode::Additive => ResponsibilityConfig::new(settings.utility.score_kind, settings.utility.alpha)?,
            UtilityMode::Multiplicative => {
                return Err(Error::InvalidInput(
                    "mean-variance strategies support only 'none' and 'additive' utilities; \
                     the multiplicative form is not a convex program"
                        .into(),
                ))
            }
        };
        if settings.lookback < 2 {
            return Err(Error::InvalidInput("lookback must be at least 2 days".into()));
        }
        if settings.kind == MvoKind::Relaxed && !(settings.lambda > 0.0) {
            return Err(Error::InvalidInput("lambda must be positive".into()));
        }
        let returns = simple_returns(&frame)?;
        Ok(Self {
            frame,
            returns,
            settings,
            resp,
        })
    }
}

impl Strategy for MvoStrategy {
    fn name(&self) -> String {
        let s = &self.settings;
        let risk = if s.use_semi { "semi" } else { "cov" };
        match s.utility.mode {
            UtilityMode::None => format!("{}/{risk}/none", s.kind),
            mode => format!("{}/{risk}/{mode}-{}", s.kind, s.utility.score_kind),
        }
    }

    fn first_valid_day(&self) -> usize {
        self.settings.lookback
    }

    fn weights(&mut self, day: usize) -> Result<PortfolioWeights> {
        let s = &self.settings;
        let moments = estimate_moments_ending(&self.returns, day, s.lookback, s.r_f)?;
        let scores = self.frame.scores_at(self.resp.score_kind, day);
        match s.kind {
            MvoKind::Exact => tangency_exact(&moments, s.r_f, &self.resp, &scores, s.use_semi),
            MvoKind::Relaxed => tangency_relaxed(&moments, s.lambda, &self.resp, &scores, s.use_semi),
        }
    }
}

/// Trained policy acting deterministically (actor mean through softmax).
#[derive(Debug, Clone)]
pub struct PolicyStrategy {
    name: String,
    params: PolicyParams,
    builder: ObservationBuilder,
}

impl PolicyStrategy {
    pub fn new(name: impl Into<String>, params: PolicyParams, builder: ObservationBuilder) -> Result<Self> {
        if params.obs_dim() != builder.dim() || params.action_dim() != builder.frame().n_assets() {
            return Err(Error::DimensionMismatch {
                expected: builder.dim(),
                actual: params.obs_dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            params,
            builder,
        })
    }
}

impl Strategy for PolicyStrategy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn first_valid_day(&self) -> usize {
        self.builder.first_valid_day()
    }

    fn weights(&mut self, day: usize) -> Result<PortfolioWeights> {
        let obs = self.builder.build(day)?.to_vec();
        let mean = self.params.mean_action(&obs)?;
        PortfolioWeights::softmax(mean.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayFailure {
    pub date: NaiveDate,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub strategy: String,
    pub tickers: Vec<String>,
    /// Realization dates.
    pub dates: Vec<NaiveDate>,
    /// Weights held over each row's return, `T × N`.
    pub weights: Vec<Vec<f64>>,
    pub returns: Vec<f64>,
    /// Performance ratio per row in [`ScoreKind::ALL`] order, scored on the decision day.
    pub p_r: Vec<[f64; 4]>,
    pub cumulative: Vec<f64>,
    pub annualized_return: f64,
    pub max_drawdown: f64,
    pub mean_p_r: [f64; 4],
    /// Days where the strategy failed and uniform weights were used.
    pub failures: Vec<DayFailure>,
}

/// `Π(1 + R)^{252/T} − 1`.
pub fn annualized_return(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::InvalidInput("annualized return of an empty series".into()));
    }
    if let Some(r) = returns.iter().find(|r| **r <= -1.0) {
        return Err(Error::TotalLoss(*r));
    }
    let growth: f64 = returns.iter().map(|r| 1.0 + r).product();
    Ok(growth.powf(TRADING_DAYS / returns.len() as f64) - 1.0)
}

/// `c_t = Π_{τ≤t}(1 + R_τ) − 1`.
pub fn cumulative_returns(returns: &[f64]) -> Vec<f64> {
    let mut growth = 1.0;
    returns
        .iter()
        .map(|r| {
            growth *= 1.0 + r;
            growth - 1.0
        })
        .collect()
}

/// Worst `equity / running peak − 1` with `equity = 1 + cumulative`. The
/// initial equity of 1 counts as a peak.
pub fn max_drawdown(cumulative: &[f64]) -> Result<f64> {
    if cumulative.is_empty() {
        return Err(Error::InvalidInput("drawdown of an empty series".into()));
    }
    let mut peak = 1.0_f64;
    let mut worst = 0.0_f64;
    for c in cumulative {
        let equity = 1.0 + c;
        peak = peak.max(equity);
        worst = worst.min(equity / peak - 1.0);
    }
    Ok(worst)
}

/// Rolls `strategy` through the trading days in `range` (inclusive).
pub fn run_backtest(strategy: &mut dyn Strategy, frame: &MarketFrame, range: (NaiveDate, NaiveDate)) -> Result<BacktestReport> {
    let first = frame
        .day_on_or_after(range.0)
        .ok_or_else(|| Error::InsufficientData(format!("no trading day on or after {}", range.0)))?;
    let last = frame
        .day_on_or_before(range.1)
        .ok_or_else(|| Error::InsufficientData(format!("no trading day on or before {}", range.1)))?;
    let first = first.max(strategy.first_valid_day());
    if last <= first {
        return Err(Error::InsufficientData(format!(
            "range {}..{} has no decision day after the strategy's warm-up",
            range.0, range.1
        )));
    }
    let n = frame.n_assets();
    let prices = frame.prices();

    let mut report = BacktestReport {
        strategy: strategy.name(),
        tickers: frame.tickers().to_vec(),
        dates: Vec::with_capacity(last - first),
        weights: Vec::with_capacity(last - first),
        returns: Vec::with_capacity(last - first),
        p_r: Vec::with_capacity(last - first),
        cumulative: Vec::new(),
        annualized_return: 0.0,
        max_drawdown: 0.0,
        mean_p_r: [0.0; 4],
        failures: Vec::new(),
    };
    for day in first..last {
        let w = match strategy.weights(day) {
            Ok(w) if w.len() == n => w,
            Ok(w) => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: w.len(),
                })
            }
            Err(err) => {
                warn!("{} on {}: {err}; holding uniform weights", report.strategy, frame.dates()[day]);
                report.failures.push(DayFailure {
                    date: frame.dates()[day],
                    message: err.to_string(),
                });
                PortfolioWeights::uniform(n)
            }
        };
        let r: f64 = (0..n).map(|i| w.as_slice()[i] * (prices[(i, day + 1)] / prices[(i, day)] - 1.0)).sum();
        let p_r = ScoreKind::ALL.map(|k| performance_ratio(&w, &frame.scores_at(k, day)).unwrap_or(f64::NAN));
        report.dates.push(frame.dates()[day + 1]);
        report.weights.push(w.as_slice().to_vec());
        report.returns.push(r);
        report.p_r.push(p_r);
    }
    report.cumulative = cumulative_returns(&report.returns);
    report.annualized_return = annualized_return(&report.returns)?;
    report.max_drawdown = max_drawdown(&report.cumulative)?;
    let t = report.returns.len() as f64;
    report.mean_p_r = std::array::from_fn(|k| report.p_r.iter().map(|p| p[k]).sum::<f64>() / t);
    Ok(report)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

impl BacktestReport {
    /// `date,R_t,cum_return,p_r_esg,p_r_e,p_r_s,p_r_g,w_<ticker>...`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        let mut header: Vec<String> = ["date", "R_t", "cum_return"].iter().map(|s| s.to_string()).collect();
        header.extend(ScoreKind::ALL.iter().map(|k| format!("p_r_{}", k.as_str())));
        header.extend(self.tickers.iter().map(|t| format!("w_{t}")));
        w.write_record(&header).map_err(csv_error)?;
        for t in 0..self.returns.len() {
            let mut row = vec![
                self.dates[t].to_string(),
                self.returns[t].to_string(),
                self.cumulative[t].to_string(),
            ];
            row.extend(self.p_r[t].iter().map(|v| v.to_string()));
            row.extend(self.weights[t].iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a file written by [`BacktestReport::write_csv`] and recomputes the summary metrics.
    pub fn read_csv(path: &Path, strategy: impl Into<String>) -> Result<Self> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(csv_error)?;
        let header = rdr.headers().map_err(csv_error)?.clone();
        let fixed = ["date", "R_t", "cum_return", "p_r_esg", "p_r_e", "p_r_s", "p_r_g"];
        if header.len() < fixed.len() + 1 || header.iter().zip(fixed).any(|(h, f)| h != f) {
            return Err(parse_err(1, "unexpected report header".into()));
        }
        let tickers: Vec<String> = header
            .iter()
            .skip(fixed.len())
            .map(|h| h.strip_prefix("w_").map(str::to_string).ok_or_else(|| parse_err(1, format!("bad column '{h}'"))))
            .collect::<Result<_>>()?;
        let mut report = BacktestReport {
            strategy: strategy.into(),
            tickers,
            dates: Vec::new(),
            weights: Vec::new(),
            returns: Vec::new(),
            p_r: Vec::new(),
            cumulative: Vec::new(),
            annualized_return: 0.0,
            max_drawdown: 0.0,
            mean_p_r: [0.0; 4],
            failures: Vec::new(),
        };
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map_or(0, |p| p.line());
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| parse_err(line, format!("column {}: {e}", &header[i])))
            };
            report
                .dates
                .push(rec[0].parse().map_err(|e| parse_err(line, format!("date: {e}")))?);
            report.returns.push(num(1)?);
            report.cumulative.push(num(2)?);
            report.p_r.push([num(3)?, num(4)?, num(5)?, num(6)?]);
            report.weights.push((fixed.len()..rec.len()).map(num).collect::<Result<_>>()?);
        }
        if report.returns.is_empty() {
            return Err(parse_err(1, "report has no rows".into()));
        }
        report.annualized_return = annualized_return(&report.returns)?;
        report.max_drawdown = max_drawdown(&report.cumulative)?;
        let t = report.returns.len() as f64;
        report.mean_p_r = std::array::from_fn(|k| report.p_r.iter().map(|p| p[k]).sum::<f64>() / t);
        Ok(report)
    }
}

/// Files written by [`compare_strategies`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonFiles {
    pub summary: PathBuf,
    pub table: PathBuf,
    pub series: PathBuf,
    pub histogram: PathBuf,
    pub svgs: Vec<PathBuf>,
}

/// `(lower edge, upper edge, counts per report)` for each bin of one score kind.
pub type Histogram = Vec<(f64, f64, Vec<usize>)>;

/// Shared-edge histogram of every report's p_r series for `kind`.
pub fn p_r_histogram(reports: &[BacktestReport], kind: ScoreKind, bins: usize) -> Histogram {
    let values = |r: &BacktestReport| r.p_r.iter().map(|p| p[kind.index()]).filter(|v| v.is_finite()).collect::<Vec<_>>();
    let all: Vec<f64> = reports.iter().flat_map(values).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if all.is_empty() {
        return Vec::new();
    }
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut out: Histogram = (0..bins)
        .map(|b| (lo + b as f64 * width, if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width }, vec![0; reports.len()]))
        .collect();
    for (j, r) in reports.iter().enumerate() {
        for v in values(r) {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            out[b].2[j] += 1;
        }
    }
    out
}

type Metric = Box<dyn Fn(&BacktestReport) -> f64>;

/// Writes the summary (one row per strategy), a metric-by-strategy table,
/// the per-day cumulative-return series, p_r histograms, and optionally SVG
/// charts into `dir`.
pub fn compare_strategies(reports: &[BacktestReport], dir: &Path, svg: bool) -> Result<ComparisonFiles> {
    let Some(first) = reports.first() else {
        return Err(Error::InvalidInput("nothing to compare".into()));
    };
    if let Some(bad) = reports.iter().find(|r| r.dates != first.dates) {
        return Err(Error::Alignment(format!(
            "report '{}' covers different dates than '{}'",
            bad.strategy, first.strategy
        )));
    }
    std::fs::create_dir_all(dir)?;
    let files = ComparisonFiles {
        summary: dir.join("summary.csv"),
        table: dir.join("table.csv"),
        series: dir.join("series.csv"),
        histogram: dir.join("pr_histogram.csv"),
        svgs: Vec::new(),
    };

    let mut w = csv::Writer::from_writer(File::create(&files.summary)?);
    w.write_record([
        "strategy",
        "annualized_return",
        "max_drawdown",
        "mean_p_r_esg",
        "mean_p_r_e",
        "mean_p_r_s",
        "mean_p_r_g",
        "failed_days",
    ])
    .map_err(csv_error)?;
    for r in reports {
        let mut row = vec![r.strategy.clone(), r.annualized_return.to_string(), r.max_drawdown.to_string()];
        row.extend(r.mean_p_r.iter().map(|v| v.to_string()));
        row.push(r.failures.len().to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(&files.table)?);
    let mut header = vec!["metric".to_string()];
    header.extend(reports.iter().map(|r| r.strategy.clone()));
    w.write_record(&header).map_err(csv_error)?;
    let mut metrics: Vec<(String, Metric)> = vec![
        ("annualized_return".into(), Box::new(|r| r.annualized_return)),
        ("max_drawdown".into(), Box::new(|r| r.max_drawdown)),
    ];
    for kind in ScoreKind::ALL {
        metrics.push((format!("mean_p_r_{}", kind.as_str()), Box::new(move |r| r.mean_p_r[kind.index()])));
    }
    for (name, f) in &metrics {
        let mut row = vec![name.clone()];
        row.extend(reports.iter().map(|r| f(r).to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(&files.series)?);
    let mut header = vec!["date".to_string()];
    header.extend(reports.iter().map(|r| r.strategy.clone()));
    w.write_record(&header).map_err(csv_error)?;
    for (t, date) in first.dates.iter().enumerate() {
        let mut row = vec![date.to_string()];
        row.extend(reports.iter().map(|r| r.cumulative[t].to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(&files.histogram)?);
    w.write_record(["score_kind", "strategy", "bin_lower", "bin_upper", "count"])
        .map_err(csv_error)?;
    let histograms: Vec<(ScoreKind, Histogram)> = ScoreKind::ALL
        .iter()
        .map(|k| (*k, p_r_histogram(reports, *k, HISTOGRAM_BINS)))
        .collect();
    for (kind, hist) in &histograms {
        for (j, r) in reports.iter().enumerate() {
            for (lo, hi, counts) in hist {
                w.write_record([kind.as_str(), &r.strategy, &lo.to_string(), &hi.to_string(), &counts[j].to_string()])
                    .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;

    let mut files = files;
    if svg {
        let path = dir.join("cumulative.svg");
        std::fs::write(&path, cumulative_svg(reports))?;
        files.svgs.push(path);
        for (kind, hist) in &histograms {
            let path = dir.join(format!("pr_histogram_{}.svg", kind.as_str()));
            std::fs::write(&path, histogram_svg(reports, *kind, hist))?;
            files.svgs.push(path);
        }
    }
    Ok(files)
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        SVG_W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#,
        SVG_H - MARGIN,
        SVG_W - MARGIN,
        SVG_H - MARGIN,
        SVG_H - MARGIN
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn legend(s: &mut String, names: &[String]) {
    for (j, name) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * j as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="10" fill="{}">{}</text>"#,
            MARGIN + 10.0,
            PALETTE[j % PALETTE.len()],
            escape(name)
        );
    }
}

/// Minimal multi-series line chart; each series is `(label, points)`.
pub fn line_chart_svg(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut s = svg_open(title);
    let pts = series.iter().flat_map(|(_, p)| p.iter().copied());
    let (x0, x1, y0, y1) = pts.fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), (x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let (xs, ys) = (span(x0, x1), span(y0, y1));
    for (j, (_, points)) in series.iter().enumerate() {
        let coords: Vec<String> = points
            .iter()
            .map(|(x, y)| {
                let px = MARGIN + (SVG_W - 2.0 * MARGIN) * (x - x0) / xs;
                let py = SVG_H - MARGIN - (SVG_H - 2.0 * MARGIN) * (y - y0) / ys;
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[j % PALETTE.len()],
            coords.join(" ")
        );
    }
    legend(&mut s, &series.iter().map(|(name, _)| name.clone()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

fn cumulative_svg(reports: &[BacktestReport]) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> = reports
        .iter()
        .map(|r| {
            let pts = r.cumulative.iter().enumerate().map(|(t, c)| (t as f64, *c)).collect();
            (r.strategy.clone(), pts)
        })
        .collect();
    line_chart_svg("Cumulative return", &series)
}

fn histogram_svg(reports: &[BacktestReport], kind: ScoreKind, hist: &Histogram) -> String {
    let mut s = svg_open(&format!("Distribution of p_r ({kind})"));
    let max = hist.iter().flat_map(|(_, _, c)| c.iter().copied()).max().unwrap_or(0).max(1) as f64;
    let bins = hist.len().max(1) as f64;
    let bin_w = (SVG_W - 2.0 * MARGIN) / bins;
    let bar_w = bin_w / reports.len().max(1) as f64;
    for (b, (_, _, counts)) in hist.iter().enumerate() {
        for (j, c) in counts.iter().enumerate() {
            let h = (SVG_H - 2.0 * MARGIN) * *c as f64 / max;
            let x = MARGIN + b as f64 * bin_w + j as f64 * bar_w;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{}" opacity="0.8"/>"#,
                SVG_H - MARGIN - h,
                PALETTE[j % PALETTE.len()]
            );
        }
    }
    legend(&mut s, &reports.iter().map(|r| r.strategy.clone()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}
