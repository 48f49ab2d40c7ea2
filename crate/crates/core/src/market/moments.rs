use nalgebra::{DMatrix, DVector};

use super::MarketFrame;
use crate::error::{Error, Result};
use crate::linalg;

/// Trailing-window return moments used by the optimizers and the RL state.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    /// Mean daily simple return per asset.
    pub mu: DVector<f64>,
    /// Sample covariance (divisor `window - 1`).
    pub sigma: DMatrix<f64>,
    /// Downside semicovariance against the benchmark (divisor `window`).
    pub sigma_semi: DMatrix<f64>,
    pub window: usize,
}

impl MomentEstimates {
    /// Builds estimates from given moments, checking shapes and symmetry.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, sigma_semi: DMatrix<f64>, window: usize) -> Result<Self> {
        let n = mu.len();
        if sigma.shape() != (n, n) || sigma_semi.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: sigma.nrows(),
            });
        }
        if window < 2 {
            return Err(Error::InvalidInput("moment window must be at least 2".into()));
        }
        for m in [&sigma, &sigma_semi] {
            if linalg::asymmetry(m) > 1e-12 {
                return Err(Error::InvalidInput("covariance matrix is not symmetric".into()));
            }
        }
        Ok(Self {
            mu,
            sigma,
            sigma_semi,
            window,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    /// The risk matrix a strategy optimizes against.
    pub fn risk(&self, use_semi: bool) -> &DMatrix<f64> {
        if use_semi {
            &self.sigma_semi
        } else {
            &self.sigma
        }
    }
}

/// `r[i][t] = p[i][t+1] / p[i][t] - 1`, an `N × (T-1)` matrix.
pub fn simple_returns(frame: &MarketFrame) -> Result<DMatrix<f64>> {
    let p = frame.prices();
    if p.ncols() < 2 {
        return Err(Error::InsufficientData("need at least two trading days for returns".into()));
    }
    Ok(DMatrix::from_fn(p.nrows(), p.ncols() - 1, |i, t| p[(i, t + 1)] / p[(i, t)] - 1.0))
}

/// Moments over the last `window` columns of `returns`.
pub fn estimate_moments(returns: &DMatrix<f64>, window: usize, r_f: f64) -> Result<MomentEstimates> {
    estimate_moments_ending(returns, returns.ncols(), window, r_f)
}

/// Moments over the `window` return columns ending just before column `end`.
pub fn estimate_moments_ending(
    returns: &DMatrix<f64>,
    end: usize,
    window: usize,
    r_f: f64,
) -> Result<MomentEstimates> {
    if window < 2 {
        return Err(Error::InvalidInput("moment window must be at least 2".into()));
    }
    if end > returns.ncols() || window > end {
        return Err(Error::InsufficientData(format!(
            "window of {window} returns ending at column {end} needs {window} columns, have {}",
            end.min(returns.ncols())
        )));
    }
    let n = returns.nrows();
    let block = returns.columns(end - window, window);
    let w = window as f64;

    let mu = DVector::from_fn(n, |i, _| block.row(i).sum() / w);
    let centered = DMatrix::from_fn(n, window, |i, t| block[(i, t)] - mu[i]);
    let sigma = linalg::symmetrize(&(&centered * centered.transpose() / (w - 1.0)));

    let downside = DMatrix::from_fn(n, window, |i, t| (block[(i, t)] - r_f).min(0.0));
    let sigma_semi = linalg::symmetrize(&(&downside * downside.transpose() / w));

    MomentEstimates::new(mu, sigma, sigma_semi, window)
}
