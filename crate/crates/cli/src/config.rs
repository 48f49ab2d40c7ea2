//! Run configuration: a TOML file whose every field has a default, plus
//! command-line overrides.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use respo::market::ScoreKind;
use respo::ppo::PpoConfig;
use respo::reward::{RatioKind, UtilityConfig, UtilityMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    MvoExact,
    MvoRelaxed,
    Rl,
    Uniform,
}

impl StrategyKind {
    pub fn is_mvo(self) -> bool {
        matches!(self, StrategyKind::MvoExact | StrategyKind::MvoRelaxed)
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrategyKind::MvoExact => "mvo-exact",
            StrategyKind::MvoRelaxed => "mvo-relaxed",
            StrategyKind::Rl => "rl",
            StrategyKind::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub prices: PathBuf,
    pub scores: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            prices: PathBuf::from("data/prices.csv"),
            scores: PathBuf::from("data/scores.csv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Sharpe, or Sortino (semicovariance for mean-variance strategies).
    pub objective: RatioKind,
    pub utility: UtilityMode,
    pub score_kind: ScoreKind,
    pub alpha: f64,
    /// Risk aversion of the relaxed mean-variance program.
    pub lambda: f64,
    pub r_f: f64,
    /// Timescale of the differential-ratio moving averages.
    pub eta: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::MvoExact,
            objective: RatioKind::Sharpe,
            utility: UtilityMode::None,
            score_kind: ScoreKind::Esg,
            alpha: 0.1,
            lambda: 10.0,
            r_f: 0.0,
            eta: 1.0 / 252.0,
        }
    }
}

impl StrategyConfig {
    pub fn utility_config(&self) -> Result<UtilityConfig, CliError> {
        UtilityConfig::new(self.utility, self.score_kind, self.alpha).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LookbackConfig {
    /// Rolling window for mean-variance moment estimates.
    pub moments: usize,
    /// Trailing returns shown to the policy.
    pub observation: usize,
}

impl Default for LookbackConfig {
    fn default() -> Self {
        Self {
            moments: 60,
            observation: 60,
        }
    }
}

/// Dates as native TOML dates (`2020-01-01`), also accepting quoted strings.
mod toml_date {
    use chrono::NaiveDate;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};
    use toml::value::Datetime;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Native(Datetime),
        Text(String),
    }

    fn parse<E: Error>(raw: Raw) -> Result<NaiveDate, E> {
        let text = match raw {
            Raw::Native(dt) => {
                if dt.time.is_some() || dt.offset.is_some() {
                    return Err(E::custom(format!("expected a plain date, got {dt}")));
                }
                dt.to_string()
            }
            Raw::Text(s) => s,
        };
        NaiveDate::parse_from_str(&text, "%Y-%m-%d").map_err(|e| E::custom(format!("bad date '{text}': {e}")))
    }

    fn native(d: &NaiveDate) -> Datetime {
        d.to_string().parse().expect("ISO date is a TOML date")
    }

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        native(d).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        parse(Raw::deserialize(d)?)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(d: &Option<NaiveDate>, s: S) -> Result<S::Ok, S::Error> {
            d.as_ref().map(native).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
            Option::<Raw>::deserialize(d)?.map(parse).transpose()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DateConfig {
    #[serde(with = "toml_date")]
    pub train_start: NaiveDate,
    #[serde(with = "toml_date")]
    pub train_end: NaiveDate,
    #[serde(with = "toml_date")]
    pub eval_start: NaiveDate,
    #[serde(with = "toml_date")]
    pub eval_end: NaiveDate,
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

impl Default for DateConfig {
    fn default() -> Self {
        Self {
            train_start: date(2014, 1, 1),
            train_end: date(2019, 11, 30),
            eval_start: date(2020, 1, 1),
            eval_end: date(2021, 11, 30),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    /// Decisions per training episode; episodes start on random training days.
    pub episode_days: usize,
    /// Relative paths resolve against the output directory.
    pub checkpoint: PathBuf,
    pub ppo: PpoConfig,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            episode_days: 252,
            checkpoint: PathBuf::from("checkpoint.json"),
            ppo: PpoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierConfig {
    /// Floored portfolios need `wᵀs ≥ floor_factor · uᵀs`.
    pub floor_factor: f64,
    pub points: usize,
    /// Day whose moments and scores are used; defaults to the evaluation start.
    #[serde(with = "toml_date::option", skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            floor_factor: 1.25,
            points: 50,
            date: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds training (and nothing else; all other commands are deterministic).
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Also render SVG charts.
    pub svg: bool,
    pub data: DataConfig,
    pub strategy: StrategyConfig,
    pub lookback: LookbackConfig,
    pub dates: DateConfig,
    pub rl: RlConfig,
    pub frontier: FrontierConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            svg: false,
            data: DataConfig::default(),
            strategy: StrategyConfig::default(),
            lookback: LookbackConfig::default(),
            dates: DateConfig::default(),
            rl: RlConfig::default(),
            frontier: FrontierConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        if self.rl.checkpoint.is_absolute() {
            self.rl.checkpoint.clone()
        } else {
            self.output_dir.join(&self.rl.checkpoint)
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |msg: String| Err(CliError::Config(msg));
        let s = &self.strategy;
        if s.kind.is_mvo() && s.utility == UtilityMode::Multiplicative {
            return err(format!(
                "{} cannot use the multiplicative utility: the program would not be convex; use 'none' or 'additive'",
                s.kind
            ));
        }
        if !(s.alpha >= 0.0) || !s.alpha.is_finite() {
            return err(format!("alpha must be a non-negative number, got {}", s.alpha));
        }
        if !(s.lambda > 0.0) || !s.lambda.is_finite() {
            return err(format!("lambda must be positive, got {}", s.lambda));
        }
        if !(s.eta > 0.0 && s.eta <= 1.0) {
            return err(format!("eta must lie in (0, 1], got {}", s.eta));
        }
        if !s.r_f.is_finite() {
            return err("r_f must be finite".into());
        }
        if self.lookback.moments < 2 || self.lookback.observation < 2 {
            return err("lookbacks must be at least 2 days".into());
        }
        let d = &self.dates;
        if d.train_start > d.train_end || d.eval_start > d.eval_end {
            return err("each date range must start before it ends".into());
        }
        if self.rl.episode_days == 0 {
            return err("rl.episode_days must be positive".into());
        }
        if !(self.frontier.floor_factor > 0.0) || self.frontier.points < 2 {
            return err("frontier needs a positive floor_factor and at least 2 points".into());
        }
        self.rl.ppo.validate().map_err(|e| CliError::Config(e.to_string()))
    }
}
