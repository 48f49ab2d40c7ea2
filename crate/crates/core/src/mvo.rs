//! Mean-variance programs: minimum variance, the exact tangency portfolio
//! (via `y = κw`) with an additive responsibility term, the relaxed
//! risk-aversion form, and the responsibility-floored efficient frontier.

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::market::{MomentEstimates, ScoreKind};
use crate::qp::{solve_qp, QpProblem, QpStatus};

/// Solver tolerance used by every strategy.
pub const QP_TOLERANCE: f64 = 1e-9;
pub const QP_MAX_ITER: usize = 200;

const SUM_TOLERANCE: f64 = 1e-8;
const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Long-only, fully-invested portfolio weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights(DVector<f64>);

impl PortfolioWeights {
    /// Validates `Σw = 1` (within 1e-8) and `w ≥ -1e-10`.
    pub fn new(w: DVector<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and non-empty".into()));
        }
        if (w.sum() - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("weights sum to {}, not 1", w.sum())));
        }
        if w.iter().any(|v| *v < -NEGATIVE_TOLERANCE) {
            return Err(Error::InvalidInput("weights must be long-only".into()));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(DVector::from_element(n, 1.0 / n as f64))
    }

    /// Maps an arbitrary real vector onto the open simplex.
    pub fn softmax(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::InvalidInput("empty action".into()));
        }
        if logits.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidAction("action contains NaN".into()));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        Ok(Self(DVector::from_iterator(exp.len(), exp.iter().map(|e| e / total))))
    }

    /// Clips solver round-off below zero and renormalizes.
    fn from_solver(x: &DVector<f64>) -> Result<Self> {
        let clipped = x.map(|v| v.max(0.0));
        let total = clipped.sum();
        if !(total > 0.0) {
            return Err(Error::Solver("solution has no positive weight".into()));
        }
        Self::new(clipped / total)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Which score enters a program and how strongly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsibilityConfig {
    pub score_kind: ScoreKind,
    pub alpha: f64,
}

impl ResponsibilityConfig {
    pub fn new(score_kind: ScoreKind, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!("alpha must be a non-negative number, got {alpha}")));
        }
        Ok(Self { score_kind, alpha })
    }

    /// No responsibility term.
    pub fn disabled() -> Self {
        Self {
            score_kind: ScoreKind::Esg,
            alpha: 0.0,
        }
    }
}

/// Equal-weight vector `u` with entries `1/n`.
pub fn uniform_vector(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0 / n as f64)
}

/// `α · s / (uᵀs)`, the gradient of the responsibility term. Zero when α = 0.
fn responsibility_gradient(alpha: f64, scores: &DVector<f64>) -> Result<DVector<f64>> {
    if alpha == 0.0 {
        return Ok(DVector::zeros(scores.len()));
    }
    let baseline = uniform_vector(scores.len()).dot(scores);
    if !(baseline > 0.0) {
        return Err(Error::UndefinedScore);
    }
    Ok(scores * (alpha / baseline))
}

fn check_scores(moments: &MomentEstimates, scores: &DVector<f64>) -> Result<()> {
    if scores.len() != moments.n_assets() {
        return Err(Error::DimensionMismatch {
            expected: moments.n_assets(),
            actual: scores.len(),
        });
    }
    Ok(())
}

fn budget_row(n: usize) -> (DMatrix<f64>, DVector<f64>) {
    (DMatrix::from_element(1, n, 1.0), DVector::from_element(1, 1.0))
}

/// `min wᵀΣw` s.t. `wᵀμ ≥ μ*`, `1ᵀw = 1`, `w ≥ 0`. Pass `f64::NEG_INFINITY`
/// to drop the return constraint.
pub fn min_variance(moments: &MomentEstimates, mu_star: f64) -> Result<PortfolioWeights> {
    min_variance_with_floor(moments, mu_star, None)
}

fn min_variance_with_floor(
    moments: &MomentEstimates,
    mu_star: f64,
    score_floor: Option<(&DVector<f64>, f64)>,
) -> Result<PortfolioWeights> {
    let n = moments.n_assets();
    let max_mu = moments.mu.max();
    if mu_star > max_mu {
        return Err(Error::Infeasible);
    }
    let (a, b) = budget_row(n);
    let mut problem = QpProblem::new(&moments.sigma * 2.0, DVector::zeros(n))?
        .equalities(a, b)?
        .nonnegative()?;
    if mu_star.is_finite() {
        problem = problem.inequalities(
            DMatrix::from_row_slice(1, n, moments.mu.as_slice()),
            DVector::from_element(1, mu_star),
        )?;
    }
    if let Some((scores, floor)) = score_floor {
        if floor > scores.max() {
            return Err(Error::Infeasible);
        }
        problem = problem.inequalities(
            DMatrix::from_row_slice(1, n, scores.as_slice()),
            DVector::from_element(1, floor),
        )?;
    }
    let sol = solve_qp(&problem, QP_TOLERANCE, QP_MAX_ITER).into_result()?;
    PortfolioWeights::from_solver(&sol.x)
}

/// Exact tangency portfolio with an additive responsibility term:
///
/// `min_y yᵀΣy − α (yᵀs)/(uᵀs)` s.t. `μ̂ᵀy = 1`, `y ≥ 0`, with `μ̂ = μ − r_f`,
/// then `w = y / 1ᵀy`. With `α = 0` this is the maximum-Sharpe portfolio.
/// `use_semi` swaps Σ for the downside semicovariance.
pub fn tangency_exact(
    moments: &MomentEstimates,
    r_f: f64,
    resp: &ResponsibilityConfig,
    scores_today: &DVector<f64>,
    use_semi: bool,
) -> Result<PortfolioWeights> {
    check_scores(moments, scores_today)?;
    let n = moments.n_assets();
    let excess = moments.mu.add_scalar(-r_f);
    if excess.iter().all(|m| *m <= 0.0) {
        return Err(Error::DegenerateMarket);
    }
    let c = -responsibility_gradient(resp.alpha, scores_today)?;
    let problem = QpProblem::new(moments.risk(use_semi) * 2.0, c)?
        .equalities(DMatrix::from_row_slice(1, n, excess.as_slice()), DVector::from_element(1, 1.0))?
        .nonnegative()?;
    let sol = solve_qp(&problem, QP_TOLERANCE, QP_MAX_ITER).into_result()?;
    let kappa = sol.x.iter().map(|v| v.max(0.0)).sum::<f64>();
    if !(kappa > 0.0) {
        return Err(Error::Solver(format!("recovered kappa = {kappa} is not positive")));
    }
    debug!("tangency_exact: kappa = {kappa:.6e}, kkt = {:.2e}", sol.kkt_residual);
    PortfolioWeights::from_solver(&sol.x)
}

/// Relaxed tangency: `max_w μᵀw − λ wᵀΣw + α (wᵀs)/(uᵀs)` on the simplex.
pub fn tangency_relaxed(
    moments: &MomentEstimates,
    lambda: f64,
    resp: &ResponsibilityConfig,
    scores_today: &DVector<f64>,
    use_semi: bool,
) -> Result<PortfolioWeights> {
    check_scores(moments, scores_today)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let n = moments.n_assets();
    let c = -(&moments.mu + responsibility_gradient(resp.alpha, scores_today)?);
    let (a, b) = budget_row(n);
    let problem = QpProblem::new(moments.risk(use_semi) * (2.0 * lambda), c)?
        .equalities(a, b)?
        .nonnegative()?;
    let sol = solve_qp(&problem, QP_TOLERANCE, QP_MAX_ITER).into_result()?;
    PortfolioWeights::from_solver(&sol.x)
}

/// One point of a frontier sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    /// Return target imposed as `μᵀw ≥ target`.
    pub target: f64,
    /// `√(wᵀΣw)`
    pub risk: f64,
    /// `μᵀw`
    pub ret: f64,
}

/// Sweeps `points` return targets evenly between the smallest and largest
/// asset mean, solving minimum variance at each. With `esg_floor = Some(f)`
/// each portfolio must also satisfy `wᵀs ≥ f · uᵀs`. Infeasible targets are
/// skipped. Both constrained and unconstrained sweeps over the same moments
/// use the same target grid, so points can be compared by `target`.
pub fn frontier_sweep(
    moments: &MomentEstimates,
    esg_floor: Option<f64>,
    scores_today: &DVector<f64>,
    points: usize,
) -> Result<Vec<FrontierPoint>> {
    check_scores(moments, scores_today)?;
    if points < 2 {
        return Err(Error::InvalidInput("a frontier needs at least 2 points".into()));
    }
    let lo = moments.mu.min();
    let hi = moments.mu.max();
    let floor = match esg_floor {
        Some(factor) => {
            let baseline = uniform_vector(scores_today.len()).dot(scores_today);
            let floor = factor * baseline;
            let slack = 1e-12 * floor.abs();
            if scores_today.max() < floor - slack {
                return Err(Error::EmptyFrontier);
            }
            // Every long-only portfolio clears it: the constraint is redundant and,
            // left in, parallel to the budget row.
            (scores_today.min() < floor - slack).then_some(floor)
        }
        None => None,
    };
    let mut out = Vec::with_capacity(points);
    for k in 0..points {
        let target = if k + 1 == points {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (points - 1) as f64
        };
        match min_variance_with_floor(moments, target, floor.map(|f| (scores_today, f))) {
            Ok(w) => {
                let w = w.as_vector();
                out.push(FrontierPoint {
                    target,
                    risk: linalg::quad_form(&moments.sigma, w).max(0.0).sqrt(),
                    ret: moments.mu.dot(w),
                });
            }
            Err(Error::Infeasible) => continue,
            Err(err) => debug!("frontier target {target:e} skipped: {err}"),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    Ok(out)
}

/// Sharpe ratio `(μᵀw − r_f) / √(wᵀΣw)` of given weights.
pub fn sharpe_ratio(moments: &MomentEstimates, r_f: f64, w: &DVector<f64>) -> f64 {
    (moments.mu.dot(w) - r_f) / linalg::quad_form(&moments.sigma, w).sqrt()
}

/// Maps [`QpStatus`] onto the strategy error space (used by callers that
/// solve custom programs).
pub fn status_error(status: QpStatus) -> Option<Error> {
    match status {
        QpStatus::Optimal => None,
        QpStatus::Infeasible => Some(Error::Infeasible),
        QpStatus::MaxIterations => Some(Error::Solver("iteration budget exhausted".into())),
    }
}
