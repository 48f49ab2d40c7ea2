//! Rollout storage and generalized advantage estimation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// `dones[t]` marks that the episode ended with transition `t`.
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns_to_go: Vec<f64>,
}

impl RolloutBuffer {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            observations: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            advantages: Vec::new(),
            returns_to_go: Vec::new(),
        }
    }

    pub fn push(&mut self, obs: Vec<f64>, action: Vec<f64>, log_prob: f64, reward: f64, value: f64, done: bool) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
        self.advantages.clear();
        self.returns_to_go.clear();
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn has_advantages(&self) -> bool {
        !self.is_empty() && self.advantages.len() == self.len()
    }

    fn check_aligned(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.observations.len(),
            self.actions.len(),
            self.log_probs.len(),
            self.values.len(),
            self.dones.len(),
        ];
        if lens.iter().any(|l| *l != n) {
            return Err(Error::Training(format!("rollout buffer sequences disagree in length: {n} rewards vs {lens:?}")));
        }
        Ok(())
    }
}

/// Fills `advantages` and `returns_to_go`:
///
/// `δ_t = r_t + γ V_{t+1} (1 − done_t) − V_t`,
/// `A_t = δ_t + γ λ (1 − done_t) A_{t+1}`,
/// `G_t = A_t + V_t`,
///
/// where `V_n = bootstrap_value`. Advantages are left unnormalized.
pub fn gae_advantages(buffer: &mut RolloutBuffer, gamma: f64, lam: f64, bootstrap_value: f64) -> Result<()> {
    if buffer.is_empty() {
        return Err(Error::Training("cannot estimate advantages of an empty rollout".into()));
    }
    buffer.check_aligned()?;
    let n = buffer.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        let live = if buffer.dones[t] { 0.0 } else { 1.0 };
        let delta = buffer.rewards[t] + gamma * next_value * live - buffer.values[t];
        next_adv = delta + gamma * lam * live * next_adv;
        adv[t] = next_adv;
        next_value = buffer.values[t];
    }
    buffer.returns_to_go = adv.iter().zip(&buffer.values).map(|(a, v)| a + v).collect();
    buffer.advantages = adv;
    Ok(())
}

/// Zero-mean, unit-variance copy of `adv` (std floored at 1e-8).
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    adv.iter().map(|a| (a - mean) / std).collect()
}
