//! The clipped PPO objective and its exact gradient.

use nalgebra::DMatrix;

use super::network::PolicyParams;

/// One minibatch, samples as columns.
#[derive(Debug, Clone)]
pub struct Minibatch {
    pub observations: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    /// Quantity minimized: `−clipped + value_coef·value − entropy_coef·entropy`.
    pub total: f64,
    /// Mean of `min(ρÂ, clip(ρ)Â)`.
    pub clipped_surrogate: f64,
    /// Mean of `ρÂ`.
    pub unclipped_surrogate: f64,
    /// Mean squared error of the critic against the returns.
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// `mean((ρ − 1) − log ρ)`
    pub approx_kl: f64,
}

/// Loss value, and (when `want_grad`) its gradient in
/// [`PolicyParams::flatten`] order.
pub fn ppo_loss(params: &PolicyParams, batch: &Minibatch, coef: &LossCoefficients, want_grad: bool) -> (LossParts, Vec<f64>) {
    let b = batch.len();
    let bf = b as f64;
    let n = params.action_dim();
    let (mean, actor_cache) = params.actor.forward(&batch.observations);
    let (values, critic_cache) = params.critic.forward(&batch.observations);
    let std: Vec<f64> = params.log_std.iter().map(|ls| ls.exp()).collect();

    let mut parts = LossParts::default();
    // ∂L/∂logπ_i
    let mut g_logp = vec![0.0; b];
    let mut clipped_count = 0usize;
    for (i, g) in g_logp.iter_mut().enumerate() {
        let logp = params.log_prob(mean.column(i).as_slice(), batch.actions.column(i).as_slice());
        let log_ratio = logp - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - coef.clip_eps, 1.0 + coef.clip_eps) * adv;
        parts.unclipped_surrogate += unclipped;
        if unclipped <= clipped {
            parts.clipped_surrogate += unclipped;
            *g = -unclipped / bf;
        } else {
            parts.clipped_surrogate += clipped;
        }
        if (ratio - 1.0).abs() > coef.clip_eps {
            clipped_count += 1;
        }
        parts.approx_kl += (ratio - 1.0) - log_ratio;
    }
    parts.clipped_surrogate /= bf;
    parts.unclipped_surrogate /= bf;
    parts.approx_kl /= bf;
    parts.clip_fraction = clipped_count as f64 / bf;
    parts.value = (0..b).map(|i| (values[(0, i)] - batch.returns[i]).powi(2)).sum::<f64>() / bf;
    parts.entropy = params.entropy();
    parts.total = -parts.clipped_surrogate + coef.value_coef * parts.value - coef.entropy_coef * parts.entropy;

    if !want_grad {
        return (parts, Vec::new());
    }

    // ∂logπ/∂m = (a − m)/σ², ∂logπ/∂logσ = ((a − m)/σ)² − 1
    let mut g_mean = DMatrix::zeros(n, b);
    let mut g_log_std = vec![-coef.entropy_coef; n];
    for i in 0..b {
        if g_logp[i] == 0.0 {
            continue;
        }
        for k in 0..n {
            let diff = batch.actions[(k, i)] - mean[(k, i)];
            let z = diff / std[k];
            g_mean[(k, i)] = g_logp[i] * diff / (std[k] * std[k]);
            g_log_std[k] += g_logp[i] * (z * z - 1.0);
        }
    }
    let g_values = DMatrix::from_fn(1, b, |_, i| coef.value_coef * 2.0 * (values[(0, i)] - batch.returns[i]) / bf);

    let mut grad = Vec::with_capacity(params.n_params());
    params.actor.backward(&actor_cache, &g_mean, &mut grad);
    grad.extend_from_slice(&g_log_std);
    params.critic.backward(&critic_cache, &g_values, &mut grad);
    (parts, grad)
}
