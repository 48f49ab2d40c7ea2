use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("day {day} is inside the warm-up horizon (first valid day is {first_valid})")]
    WarmUp { day: usize, first_valid: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("quadratic program is infeasible")]
    Infeasible,

    #[error("solver did not converge: {0}")]
    Solver(String),

    #[error("every asset has expected return at or below the risk-free rate")]
    DegenerateMarket,

    #[error("no feasible point on the frontier")]
    EmptyFrontier,

    #[error("responsibility scores sum to zero")]
    UndefinedScore,

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("training failed: {0}")]
    Training(String),

    #[error("series contains a return of {0}, which wipes out the portfolio")]
    TotalLoss(f64),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
