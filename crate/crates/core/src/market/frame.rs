use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MAX_PRICE_GAP;
use crate::error::{Error, Result};

/// Which responsibility score a strategy or reward looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Esg,
    E,
    S,
    G,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 4] = [ScoreKind::Esg, ScoreKind::E, ScoreKind::S, ScoreKind::G];

    pub fn index(self) -> usize {
        match self {
            ScoreKind::Esg => 0,
            ScoreKind::E => 1,
            ScoreKind::S => 2,
            ScoreKind::G => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Esg => "esg",
            ScoreKind::E => "e",
            ScoreKind::S => "s",
            ScoreKind::G => "g",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "esg" => Ok(ScoreKind::Esg),
            "e" => Ok(ScoreKind::E),
            "s" => Ok(ScoreKind::S),
            "g" => Ok(ScoreKind::G),
            other => Err(Error::InvalidInput(format!("unknown score kind `{other}`"))),
        }
    }
}

/// One line of the scores CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub date: NaiveDate,
    pub ticker: String,
    /// ESG, E, S, G in that order.
    pub values: [f64; 4],
}

/// Raw price table as read from disk; cells may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// `cells[asset][day]`
    pub cells: Vec<Vec<Option<f64>>>,
}

/// Aligned daily price panel with forward-filled responsibility scores.
///
/// Prices and each score matrix are `N × T` (assets by trading days).
#[derive(Debug, Clone, PartialEq)]
pub struct MarketFrame {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: DMatrix<f64>,
    scores: [DMatrix<f64>; 4],
}

impl MarketFrame {
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        prices: DMatrix<f64>,
        scores: [DMatrix<f64>; 4],
    ) -> Result<Self> {
        let (n, t) = (tickers.len(), dates.len());
        if n == 0 || t == 0 {
            return Err(Error::InvalidInput("market frame needs at least one asset and one day".into()));
        }
        if prices.shape() != (n, t) {
            return Err(Error::InvalidInput(format!(
                "price matrix is {:?}, expected ({n}, {t})",
                prices.shape()
            )));
        }
        if scores.iter().any(|s| s.shape() != (n, t)) {
            return Err(Error::InvalidInput("score matrices must match the price shape".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("dates must be strictly increasing".into()));
        }
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::InvalidInput("prices must be finite and strictly positive".into()));
        }
        if scores.iter().flat_map(|s| s.iter()).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("scores must be finite and non-negative".into()));
        }
        Ok(Self {
            dates,
            tickers,
            prices,
            scores,
        })
    }

    /// Aligns a raw price table with monthly (or any-frequency) score rows.
    ///
    /// Scores are forward-filled onto trading days: a trading day takes the
    /// latest score dated on or before it. Tickers without any score row are
    /// dropped. The panel starts at the first day on which every remaining
    /// ticker has a score. Price gaps of up to [`MAX_PRICE_GAP`] days are
    /// forward-filled; assets with longer gaps (or missing the first day)
    /// are dropped.
    pub fn align(prices: PriceTable, scores: Vec<ScoreRow>) -> Result<Self> {
        let mut by_ticker: BTreeMap<String, Vec<(NaiveDate, [f64; 4])>> = BTreeMap::new();
        for row in scores {
            by_ticker
                .entry(row.ticker)
                .or_default()
                .push((row.date, row.values));
        }
        for rows in by_ticker.values_mut() {
            rows.sort_by_key(|(d, _)| *d);
        }
        for ticker in by_ticker.keys() {
            if !prices.tickers.contains(ticker) {
                warn!("scores for {ticker} have no price column; ignored");
            }
        }

        let mut kept: Vec<usize> = Vec::new();
        for (i, ticker) in prices.tickers.iter().enumerate() {
            if by_ticker.contains_key(ticker) {
                kept.push(i);
            } else {
                warn!("dropping {ticker}: no responsibility scores");
            }
        }
        if kept.is_empty() {
            return Err(Error::Alignment("no ticker has both prices and scores".into()));
        }

        let start = kept
            .iter()
            .map(|&i| by_ticker[&prices.tickers[i]][0].0)
            .max()
            .expect("kept is non-empty");
        let first_day = prices
            .dates
            .iter()
            .position(|d| *d >= start)
            .ok_or_else(|| Error::Alignment(format!("no trading day on or after {start}")))?;
        let dates: Vec<NaiveDate> = prices.dates[first_day..].to_vec();
        let t = dates.len();

        let mut tickers = Vec::new();
        let mut price_rows: Vec<Vec<f64>> = Vec::new();
        let mut score_rows: Vec<[Vec<f64>; 4]> = Vec::new();
        for &i in &kept {
            let ticker = &prices.tickers[i];
            let Some(series) = fill_prices(&prices.cells[i][first_day..]) else {
                warn!("dropping {ticker}: price gap longer than {MAX_PRICE_GAP} days");
                continue;
            };
            tickers.push(ticker.clone());
            price_rows.push(series);
            score_rows.push(forward_fill_scores(&by_ticker[ticker], &dates));
        }
        if tickers.is_empty() {
            return Err(Error::Alignment("every ticker was dropped".into()));
        }

        let n = tickers.len();
        let prices = DMatrix::from_fn(n, t, |i, j| price_rows[i][j]);
        let scores: [DMatrix<f64>; 4] =
            std::array::from_fn(|k| DMatrix::from_fn(n, t, |i, j| score_rows[i][k][j]));
        Self::new(dates, tickers, prices, scores)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn scores(&self) -> &[DMatrix<f64>; 4] {
        &self.scores
    }

    pub fn score_matrix(&self, kind: ScoreKind) -> &DMatrix<f64> {
        &self.scores[kind.index()]
    }

    /// Score column of one kind on one day.
    pub fn scores_at(&self, kind: ScoreKind, day: usize) -> DVector<f64> {
        self.scores[kind.index()].column(day).into_owned()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    /// Index of the first trading day on or after `date`.
    pub fn day_on_or_after(&self, date: NaiveDate) -> Option<usize> {
        let i = self.dates.partition_point(|d| *d < date);
        (i < self.dates.len()).then_some(i)
    }

    /// Index of the last trading day on or before `date`.
    pub fn day_on_or_before(&self, date: NaiveDate) -> Option<usize> {
        let i = self.dates.partition_point(|d| *d <= date);
        i.checked_sub(1)
    }

    /// Writes the prices CSV and a daily scores CSV (one row per trading day and ticker).
    pub fn write_csv(&self, prices_path: &Path, scores_path: &Path) -> Result<()> {
        write_prices(File::create(prices_path)?, &self.dates, &self.tickers, &self.prices)?;
        let mut rows = Vec::with_capacity(self.n_days() * self.n_assets());
        for (t, date) in self.dates.iter().enumerate() {
            for (i, ticker) in self.tickers.iter().enumerate() {
                rows.push(ScoreRow {
                    date: *date,
                    ticker: ticker.clone(),
                    values: std::array::from_fn(|k| self.scores[k][(i, t)]),
                });
            }
        }
        write_scores(File::create(scores_path)?, &rows)
    }
}

fn fill_prices(cells: &[Option<f64>]) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(cells.len());
    let mut last: Option<f64> = None;
    let mut gap = 0;
    for cell in cells {
        match cell {
            Some(p) => {
                last = Some(*p);
                gap = 0;
                out.push(*p);
            }
            None => {
                gap += 1;
                if gap > MAX_PRICE_GAP {
                    return None;
                }
                out.push(last?);
            }
        }
    }
    Some(out)
}

fn forward_fill_scores(rows: &[(NaiveDate, [f64; 4])], dates: &[NaiveDate]) -> [Vec<f64>; 4] {
    let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(dates.len()));
    let mut next = 0;
    let mut current = rows[0].1;
    for date in dates {
        while next < rows.len() && rows[next].0 <= *date {
            current = rows[next].1;
            next += 1;
        }
        for k in 0..4 {
            out[k].push(current[k]);
        }
    }
    out
}

/// Reads both CSV files and aligns them into a [`MarketFrame`].
pub fn ingest_csv(prices_path: &Path, scores_path: &Path) -> Result<MarketFrame> {
    let prices = parse_prices(File::open(prices_path)?, prices_path)?;
    let scores = parse_scores(File::open(scores_path)?, scores_path)?;
    MarketFrame::align(prices, scores)
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    parse_error(path, line, err.to_string())
}

fn parse_date(path: &Path, line: u64, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| parse_error(path, line, format!("bad date `{s}`: {e}")))
}

fn parse_number(path: &Path, line: u64, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(path, line, format!("bad number `{s}`")))
}

/// Parses a prices CSV: `date,<ticker1>,<ticker2>,...`. Empty cells are missing values.
pub fn parse_prices<R: Read>(reader: R, path: &Path) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0).map(str::trim) != Some("date") || header.len() < 2 {
        return Err(parse_error(path, 1, "header must be `date,<ticker>,...`"));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut dates = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); tickers.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let date = parse_date(path, line, &record[0])?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(parse_error(path, line, "dates must be strictly increasing"));
            }
        }
        dates.push(date);
        for (i, cell) in record.iter().skip(1).enumerate() {
            if cell.trim().is_empty() {
                cells[i].push(None);
                continue;
            }
            let p = parse_number(path, line, cell)?;
            if p <= 0.0 {
                return Err(parse_error(path, line, format!("price must be positive, got {p}")));
            }
            cells[i].push(Some(p));
        }
    }
    if dates.is_empty() {
        return Err(Error::Alignment(format!("{} has no rows", path.display())));
    }
    Ok(PriceTable {
        dates,
        tickers,
        cells,
    })
}

/// Parses a scores CSV: `date,ticker,esg,e,s,g`.
pub fn parse_scores<R: Read>(reader: R, path: &Path) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["date", "ticker", "esg", "e", "s", "g"];
    if header.len() != expected.len() || header.iter().zip(expected).any(|(h, e)| h.trim() != e) {
        return Err(parse_error(path, 1, "header must be `date,ticker,esg,e,s,g`"));
    }
    let mut seen = std::collections::HashSet::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let date = parse_date(path, line, &record[0])?;
        let ticker = record[1].trim().to_string();
        let mut values = [0.0; 4];
        for (k, v) in values.iter_mut().enumerate() {
            *v = parse_number(path, line, &record[k + 2])?;
            if *v < 0.0 {
                return Err(parse_error(path, line, "scores must be non-negative"));
            }
        }
        if !seen.insert((date, ticker.clone())) {
            return Err(parse_error(path, line, format!("duplicate score row for {ticker} on {date}")));
        }
        rows.push(ScoreRow {
            date,
            ticker,
            values,
        });
    }
    Ok(rows)
}

pub(crate) fn write_prices<W: Write>(
    writer: W,
    dates: &[NaiveDate],
    tickers: &[String],
    prices: &DMatrix<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(tickers.iter().cloned());
    w.write_record(&header).map_err(csv_io)?;
    for (t, date) in dates.iter().enumerate() {
        let mut rec = vec![date.to_string()];
        rec.extend((0..tickers.len()).map(|i| prices[(i, t)].to_string()));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_scores<W: Write>(writer: W, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "ticker", "esg", "e", "s", "g"]).map_err(csv_io)?;
    for row in rows {
        let mut rec = vec![row.date.to_string(), row.ticker.clone()];
        rec.extend(row.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(err: csv::Error) -> Error {
    Error::Io(std::io::Error::other(err))
}
