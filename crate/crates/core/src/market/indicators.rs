//! Close-only technical indicators with fixed windows.
//!
//! SMA(20), MACD line (EMA12 − EMA26), RSI(14, Wilder), Bollinger(20, ±2σ),
//! CCI(20) and ADX(14). The frame carries closes only, so CCI uses the close
//! as its typical price and ADX treats high = low = close. Every recursive
//! indicator is evaluated forward from the first day, so the value at day `t`
//! depends on prices up to `t` only.

use nalgebra::{DMatrix, DVector};

use super::MarketFrame;
use crate::error::{Error, Result};

/// Longest window (the slow MACD EMA); the first day with valid indicators.
pub const WARMUP_DAYS: usize = 26;
/// Indicators per asset in an [`IndicatorSet`].
pub const INDICATOR_COUNT: usize = 7;

const SMA_WINDOW: usize = 20;
const BOLLINGER_WIDTH: f64 = 2.0;
const MACD_FAST: usize = 12;
const MACD_SLOW: usize = 26;
const RSI_WINDOW: usize = 14;
const CCI_WINDOW: usize = 20;
const CCI_SCALE: f64 = 0.015;
const ADX_WINDOW: usize = 14;

/// Indicator values for every asset on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet {
    pub sma: DVector<f64>,
    pub macd: DVector<f64>,
    pub rsi: DVector<f64>,
    pub bollinger_upper: DVector<f64>,
    pub bollinger_lower: DVector<f64>,
    pub cci: DVector<f64>,
    pub adx: DVector<f64>,
}

impl IndicatorSet {
    /// Indicator-major flattening: all SMAs, then all MACDs, and so on.
    pub fn flatten(&self) -> Vec<f64> {
        [
            &self.sma,
            &self.macd,
            &self.rsi,
            &self.bollinger_upper,
            &self.bollinger_lower,
            &self.cci,
            &self.adx,
        ]
        .iter()
        .flat_map(|v| v.iter().copied())
        .collect()
    }
}

/// All indicators for all days, `N × T` per indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorPanel {
    panels: [DMatrix<f64>; INDICATOR_COUNT],
}

impl IndicatorPanel {
    pub fn compute(frame: &MarketFrame) -> Self {
        let prices = frame.prices();
        let (n, t) = prices.shape();
        let mut panels: [DMatrix<f64>; INDICATOR_COUNT] = std::array::from_fn(|_| DMatrix::zeros(n, t));
        for i in 0..n {
            let series: Vec<f64> = prices.row(i).iter().copied().collect();
            let rows = asset_indicators(&series);
            for (k, row) in rows.iter().enumerate() {
                for (day, v) in row.iter().enumerate() {
                    panels[k][(i, day)] = *v;
                }
            }
        }
        Self { panels }
    }

    pub fn n_days(&self) -> usize {
        self.panels[0].ncols()
    }

    pub fn at(&self, day: usize) -> Result<IndicatorSet> {
        if day < WARMUP_DAYS {
            return Err(Error::WarmUp {
                day,
                first_valid: WARMUP_DAYS,
            });
        }
        if day >= self.n_days() {
            return Err(Error::InvalidInput(format!("day {day} is past the end of the panel")));
        }
        let col = |k: usize| self.panels[k].column(day).into_owned();
        Ok(IndicatorSet {
            sma: col(0),
            macd: col(1),
            rsi: col(2),
            bollinger_upper: col(3),
            bollinger_lower: col(4),
            cci: col(5),
            adx: col(6),
        })
    }

    /// Raw `N × T` matrix of the `k`-th indicator (flattening order).
    pub fn indicator(&self, k: usize) -> &DMatrix<f64> {
        &self.panels[k]
    }
}

/// Indicators for one day, computed from prices up to and including `day`.
pub fn compute_indicators(frame: &MarketFrame, day: usize) -> Result<IndicatorSet> {
    if day < WARMUP_DAYS {
        return Err(Error::WarmUp {
            day,
            first_valid: WARMUP_DAYS,
        });
    }
    if day >= frame.n_days() {
        return Err(Error::InvalidInput(format!("day {day} is past the end of the frame")));
    }
    let prices = frame.prices();
    let n = prices.nrows();
    let mut out: [Vec<f64>; INDICATOR_COUNT] = std::array::from_fn(|_| Vec::with_capacity(n));
    for i in 0..n {
        let series: Vec<f64> = prices.row(i).iter().take(day + 1).copied().collect();
        let rows = asset_indicators(&series);
        for k in 0..INDICATOR_COUNT {
            out[k].push(rows[k][day]);
        }
    }
    let v = |k: usize| DVector::from_vec(out[k].clone());
    Ok(IndicatorSet {
        sma: v(0),
        macd: v(1),
        rsi: v(2),
        bollinger_upper: v(3),
        bollinger_lower: v(4),
        cci: v(5),
        adx: v(6),
    })
}

fn asset_indicators(close: &[f64]) -> [Vec<f64>; INDICATOR_COUNT] {
    let (sma, upper, lower) = bollinger(close, SMA_WINDOW, BOLLINGER_WIDTH);
    let fast = ema(close, MACD_FAST);
    let slow = ema(close, MACD_SLOW);
    let macd = fast.iter().zip(&slow).map(|(f, s)| f - s).collect();
    [sma, macd, rsi(close, RSI_WINDOW), upper, lower, cci(close, CCI_WINDOW), adx(close, ADX_WINDOW)]
}

/// Window start for a trailing window ending at `t` (short windows before warm-up).
fn window_start(t: usize, window: usize) -> usize {
    (t + 1).saturating_sub(window)
}

fn bollinger(close: &[f64], window: usize, width: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut sma = Vec::with_capacity(close.len());
    let mut upper = Vec::with_capacity(close.len());
    let mut lower = Vec::with_capacity(close.len());
    for t in 0..close.len() {
        let slice = &close[window_start(t, window)..=t];
        let m = slice.iter().sum::<f64>() / slice.len() as f64;
        let var = slice.iter().map(|p| (p - m).powi(2)).sum::<f64>() / slice.len() as f64;
        let sd = var.sqrt();
        sma.push(m);
        upper.push(m + width * sd);
        lower.push(m - width * sd);
    }
    (sma, upper, lower)
}

/// Exponential moving average with `alpha = 2 / (span + 1)`, seeded at the first value.
fn ema(values: &[f64], span: usize) -> Vec<f64> {
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = match values.first() {
        Some(v) => *v,
        None => return out,
    };
    for v in values {
        acc += alpha * (v - acc);
        out.push(acc);
    }
    out
}

/// Wilder smoothing: running mean for the first `period` values, then
/// `s_t = s_{t-1} + (x_t - s_{t-1}) / period`.
fn wilder(values: &[f64], period: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k < period {
            acc = (acc * k as f64 + v) / (k as f64 + 1.0);
        } else {
            acc += (v - acc) / period as f64;
        }
        out.push(acc);
    }
    out
}

fn rsi(close: &[f64], period: usize) -> Vec<f64> {
    let changes: Vec<f64> = close.windows(2).map(|w| w[1] - w[0]).collect();
    let gains: Vec<f64> = changes.iter().map(|c| c.max(0.0)).collect();
    let losses: Vec<f64> = changes.iter().map(|c| (-c).max(0.0)).collect();
    let avg_gain = wilder(&gains, period);
    let avg_loss = wilder(&losses, period);
    let mut out = vec![50.0];
    for (g, l) in avg_gain.iter().zip(&avg_loss) {
        let v = if *l == 0.0 {
            if *g == 0.0 {
                50.0
            } else {
                100.0
            }
        } else {
            100.0 - 100.0 / (1.0 + g / l)
        };
        out.push(v.clamp(0.0, 100.0));
    }
    out.truncate(close.len());
    out
}

fn cci(close: &[f64], window: usize) -> Vec<f64> {
    (0..close.len())
        .map(|t| {
            let slice = &close[window_start(t, window)..=t];
            let m = slice.iter().sum::<f64>() / slice.len() as f64;
            let mad = slice.iter().map(|p| (p - m).abs()).sum::<f64>() / slice.len() as f64;
            if mad <= 1e-12 * m.abs().max(1.0) {
                0.0
            } else {
                (close[t] - m) / (CCI_SCALE * mad)
            }
        })
        .collect()
}

fn adx(close: &[f64], period: usize) -> Vec<f64> {
    let mut plus_dm = Vec::with_capacity(close.len());
    let mut minus_dm = Vec::with_capacity(close.len());
    let mut tr = Vec::with_capacity(close.len());
    for w in close.windows(2) {
        let up = w[1] - w[0];
        let down = w[0] - w[1];
        plus_dm.push(if up > down && up > 0.0 { up } else { 0.0 });
        minus_dm.push(if down > up && down > 0.0 { down } else { 0.0 });
        tr.push(up.abs());
    }
    let s_plus = wilder(&plus_dm, period);
    let s_minus = wilder(&minus_dm, period);
    let s_tr = wilder(&tr, period);
    let dx: Vec<f64> = (0..s_tr.len())
        .map(|k| {
            if s_tr[k] <= 0.0 {
                return 0.0;
            }
            let pdi = 100.0 * s_plus[k] / s_tr[k];
            let mdi = 100.0 * s_minus[k] / s_tr[k];
            if pdi + mdi <= 0.0 {
                0.0
            } else {
                100.0 * (pdi - mdi).abs() / (pdi + mdi)
            }
        })
        .collect();
    let mut out = vec![0.0];
    out.extend(wilder(&dx, period));
    out.truncate(close.len());
    out
}
