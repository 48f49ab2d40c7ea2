//! Price and responsibility-score ingestion, return moments and technical indicators.

mod frame;
mod indicators;
mod moments;
pub mod synth;

pub use frame::{ingest_csv, parse_prices, parse_scores, MarketFrame, PriceTable, ScoreKind, ScoreRow};
pub use indicators::{compute_indicators, IndicatorPanel, IndicatorSet, INDICATOR_COUNT, WARMUP_DAYS};
pub use moments::{estimate_moments, estimate_moments_ending, simple_returns, MomentEstimates};

/// Maximum run of consecutive missing price cells that is forward-filled.
pub const MAX_PRICE_GAP: usize = 5;
