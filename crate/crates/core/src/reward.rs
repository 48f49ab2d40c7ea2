//! Differential Sharpe / Sortino rewards and the responsibility terms they
//! are combined with.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::ScoreKind;
use crate::mvo::{uniform_vector, PortfolioWeights};

/// Updates that only seed the moving moments and pay zero reward.
pub const REWARD_WARMUP: usize = 5;
/// `B − A²` at or below this gives a zero reward.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioKind {
    Sharpe,
    Sortino,
}

impl std::fmt::Display for RatioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RatioKind::Sharpe => "sharpe",
            RatioKind::Sortino => "sortino",
        })
    }
}

impl std::str::FromStr for RatioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sharpe" => Ok(RatioKind::Sharpe),
            "sortino" => Ok(RatioKind::Sortino),
            other => Err(Error::InvalidInput(format!("unknown ratio kind '{other}'"))),
        }
    }
}

/// Exponential moving estimates `A` (returns) and `B` (squared, or
/// downside-squared for Sortino) behind the differential ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferentialRatioState {
    a: f64,
    b: f64,
    eta: f64,
    kind: RatioKind,
    r_f: f64,
    steps: usize,
}

impl DifferentialRatioState {
    /// Fresh state with `A = B = 0`.
    pub fn new(kind: RatioKind, eta: f64, r_f: f64) -> Result<Self> {
        Self::with_moments(kind, eta, r_f, 0.0, 0.0, 0)
    }

    /// State with explicit moments and update count.
    pub fn with_moments(kind: RatioKind, eta: f64, r_f: f64, a: f64, b: f64, steps: usize) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidInput(format!("eta must lie in (0, 1], got {eta}")));
        }
        if !a.is_finite() || !b.is_finite() || !r_f.is_finite() {
            return Err(Error::InvalidInput("non-finite reward state".into()));
        }
        if b < 0.0 {
            return Err(Error::InvalidInput("second moment must be non-negative".into()));
        }
        Ok(Self {
            a,
            b,
            eta,
            kind,
            r_f,
            steps,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn kind(&self) -> RatioKind {
        self.kind
    }

    pub fn r_f(&self) -> f64 {
        self.r_f
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Clears the moments for a new episode.
    pub fn reset(&mut self) {
        self.a = 0.0;
        self.b = 0.0;
        self.steps = 0;
    }

    /// Running ratio `A / √(B − A²)`, or `None` while the denominator is degenerate.
    pub fn running_ratio(&self) -> Option<f64> {
        let base = self.b - self.a * self.a;
        (base > DENOMINATOR_FLOOR).then(|| self.a / base.sqrt())
    }
}

/// Applies one return to `state` and returns the differential reward
///
/// `D = (B·ΔA − ½A·ΔB) / (B − A²)^{3/2}`
///
/// evaluated at the pre-update moments.
pub fn differential_update(state: &mut DifferentialRatioState, r: f64) -> f64 {
    let (a, b) = (state.a, state.b);
    let second = match state.kind {
        RatioKind::Sharpe => r * r,
        RatioKind::Sortino => {
            let down = r.min(state.r_f);
            down * down
        }
    };
    let delta_a = r - a;
    let delta_b = second - b;
    let base = b - a * a;
    let reward = if state.steps >= REWARD_WARMUP && base > DENOMINATOR_FLOOR {
        (b * delta_a - 0.5 * a * delta_b) / base.powf(1.5)
    } else {
        0.0
    };
    state.a = a + state.eta * delta_a;
    state.b = b + state.eta * delta_b;
    state.steps += 1;
    reward
}

fn score_ratio(w: &PortfolioWeights, scores: &DVector<f64>) -> Result<f64> {
    if scores.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: scores.len(),
        });
    }
    let baseline = uniform_vector(scores.len()).dot(scores);
    if !(baseline > 0.0) {
        return Err(Error::UndefinedScore);
    }
    Ok(w.as_vector().dot(scores) / baseline)
}

/// `wᵀs / uᵀs − 1`: how much more responsible `w` is than equal weighting.
pub fn performance_ratio(w: &PortfolioWeights, scores_today: &DVector<f64>) -> Result<f64> {
    Ok(score_ratio(w, scores_today)? - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityMode {
    None,
    Additive,
    Multiplicative,
}

impl std::fmt::Display for UtilityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UtilityMode::None => "none",
            UtilityMode::Additive => "additive",
            UtilityMode::Multiplicative => "multiplicative",
        })
    }
}

impl std::str::FromStr for UtilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(UtilityMode::None),
            "additive" => Ok(UtilityMode::Additive),
            "multiplicative" => Ok(UtilityMode::Multiplicative),
            other => Err(Error::InvalidInput(format!("unknown utility mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub mode: UtilityMode,
    pub score_kind: ScoreKind,
    pub alpha: f64,
}

impl UtilityConfig {
    pub fn new(mode: UtilityMode, score_kind: ScoreKind, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidInput(format!("alpha must be a non-negative number, got {alpha}")));
        }
        Ok(Self { mode, score_kind, alpha })
    }

    /// Pure financial reward.
    pub fn none() -> Self {
        Self {
            mode: UtilityMode::None,
            score_kind: ScoreKind::Esg,
            alpha: 0.0,
        }
    }
}

/// Folds the responsibility ratio `wᵀs / uᵀs` into a differential reward:
/// unchanged for `None`, `d + α·ratio` for `Additive`, `d·ratio` for
/// `Multiplicative`.
pub fn compose_reward(d: f64, w: &PortfolioWeights, scores_today: &DVector<f64>, config: &UtilityConfig) -> Result<f64> {
    match config.mode {
        UtilityMode::None => Ok(d),
        UtilityMode::Additive => {
            let ratio = score_ratio(w, scores_today)?;
            if config.alpha == 0.0 {
                return Ok(d);
            }
            Ok(d + config.alpha * ratio)
        }
        UtilityMode::Multiplicative => Ok(d * score_ratio(w, scores_today)?),
    }
}
