//! Proximal policy optimization with a clipped surrogate, GAE advantages and
//! Adam, on small dense networks.

mod buffer;
mod checkpoint;
mod loss;
mod network;

use std::io::Write;
use std::path::Path;

use log::{debug, info};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use buffer::{gae_advantages, normalize_advantages, RolloutBuffer};
pub use checkpoint::{Checkpoint, TensorDump, CHECKPOINT_VERSION};
pub use loss::{ppo_loss, LossCoefficients, LossParts, Minibatch};
pub use network::{gaussian_log_prob, Dense, Mlp, PolicyParams, LOG_STD_MAX, LOG_STD_MIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub learn_rate: f64,
    pub n_steps: usize,
    pub minibatch: usize,
    pub epochs_per_update: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Global gradient-norm clip; `None` disables it (written as `0` in
    /// serialized form, since TOML has no null).
    #[serde(with = "optional_norm")]
    pub max_grad_norm: Option<f64>,
    pub hidden: Vec<usize>,
    pub total_steps: usize,
    pub seed: u64,
}

mod optional_norm {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(v.unwrap_or(0.0))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let v = Option::<f64>::deserialize(d)?;
        Ok(v.filter(|g| *g != 0.0))
    }
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            learn_rate: 3e-4,
            n_steps: 2048,
            minibatch: 64,
            epochs_per_update: 10,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: Some(0.5),
            hidden: vec![64, 64],
            total_steps: 500_000,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gamma and gae_lambda must lie in (0, 1]");
        }
        if !(self.learn_rate > 0.0) || !self.learn_rate.is_finite() {
            return bad("learn_rate must be positive");
        }
        if self.n_steps == 0 || self.minibatch == 0 || self.epochs_per_update == 0 {
            return bad("n_steps, minibatch and epochs_per_update must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return bad("loss coefficients must be non-negative");
        }
        if self.max_grad_norm.is_some_and(|g| !(g > 0.0)) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }

    fn coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            clip_eps: self.clip_eps,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// One environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with real-valued actions.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Starts a new episode; randomness (e.g. the start day) comes from `rng`.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<Transition>;
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for j in 0..params.len() {
            self.m[j] = self.beta1 * self.m[j] + (1.0 - self.beta1) * grad[j];
            self.v[j] = self.beta2 * self.v[j] + (1.0 - self.beta2) * grad[j] * grad[j];
            let m_hat = self.m[j] / c1;
            let v_hat = self.v[j] / c2;
            params[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Averages over one call of [`ppo_update`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Largest `clipped − unclipped` surrogate over all minibatches; never positive.
    pub max_surrogate_gap: f64,
    pub minibatches: usize,
}

fn column_batch(rows: &[Vec<f64>], idx: &[usize]) -> DMatrix<f64> {
    let dim = rows[idx[0]].len();
    let mut m = DMatrix::zeros(dim, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        m.column_mut(c).copy_from_slice(&rows[i]);
    }
    m
}

/// Runs `epochs_per_update` passes of shuffled minibatch Adam steps on the
/// clipped objective. On a non-finite loss or gradient, parameters and
/// optimizer state are restored and an error is returned.
pub fn ppo_update(
    params: &mut PolicyParams,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    if !buffer.has_advantages() {
        return Err(Error::Training("advantages must be computed before an update".into()));
    }
    let saved = (params.clone(), adam.clone());
    let advantages = normalize_advantages(&buffer.advantages);
    let coef = config.coefficients();
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut flat = params.flatten();
    let mut stats = UpdateStats {
        max_surrogate_gap: f64::NEG_INFINITY,
        ..UpdateStats::default()
    };

    for _ in 0..config.epochs_per_update {
        order.shuffle(rng);
        for idx in order.chunks(config.minibatch) {
            let batch = Minibatch {
                observations: column_batch(&buffer.observations, idx),
                actions: column_batch(&buffer.actions, idx),
                old_log_probs: idx.iter().map(|&i| buffer.log_probs[i]).collect(),
                advantages: idx.iter().map(|&i| advantages[i]).collect(),
                returns: idx.iter().map(|&i| buffer.returns_to_go[i]).collect(),
            };
            let (parts, mut grad) = ppo_loss(params, &batch, &coef, true);
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                *params = saved.0;
                *adam = saved.1;
                return Err(Error::Training(format!(
                    "non-finite loss (policy {:e}, value {:e}); update discarded",
                    -parts.clipped_surrogate, parts.value
                )));
            }
            debug_assert!(parts.clipped_surrogate <= parts.unclipped_surrogate);
            if let Some(max_norm) = config.max_grad_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    let scale = max_norm / (norm + 1e-6);
                    grad.iter_mut().for_each(|g| *g *= scale);
                }
            }
            adam.step(&mut flat, &grad);
            params.assign(&flat)?;
            params.clamp_log_std();
            flat = params.flatten();

            stats.policy_loss += -parts.clipped_surrogate;
            stats.value_loss += parts.value;
            stats.entropy += parts.entropy;
            stats.approx_kl += parts.approx_kl;
            stats.clip_fraction += parts.clip_fraction;
            stats.max_surrogate_gap = stats.max_surrogate_gap.max(parts.clipped_surrogate - parts.unclipped_surrogate);
            stats.minibatches += 1;
        }
    }
    let k = stats.minibatches as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.approx_kl /= k;
    stats.clip_fraction /= k;
    if !params.is_finite() {
        *params = saved.0;
        *adam = saved.1;
        return Err(Error::Training("parameters became non-finite; update discarded".into()));
    }
    Ok(stats)
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub update: usize,
    pub steps: usize,
    /// Mean per-step reward over the rollout.
    pub mean_reward: f64,
    /// Mean total reward of episodes that finished during the rollout (NaN if none did).
    pub mean_episode_reward: f64,
    pub episodes: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub max_surrogate_gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<TrainingRecord>,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Mean episode reward over the first and last quarter of updates,
    /// skipping updates in which no episode finished.
    pub fn quartile_means(&self) -> Option<(f64, f64)> {
        let n = self.records.len();
        if n < 4 {
            return None;
        }
        let q = n / 4;
        let mean = |rs: &[TrainingRecord]| {
            let xs: Vec<f64> = rs.iter().map(|r| r.mean_episode_reward).filter(|v| v.is_finite()).collect();
            (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
        };
        Some((mean(&self.records[..q])?, mean(&self.records[n - q..])?))
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct Trained {
    pub params: PolicyParams,
    pub log: TrainingLog,
}

/// Alternates rollouts of up to `n_steps` transitions with [`ppo_update`]
/// until `total_steps` transitions have been collected. Deterministic given
/// `config.seed` and a deterministic environment.
pub fn train<E: Environment>(env: &mut E, config: &PpoConfig) -> Result<Trained> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = PolicyParams::new(env.obs_dim(), env.action_dim(), &config.hidden, &mut rng)?;
    let mut adam = Adam::new(params.n_params(), config.learn_rate);
    let mut log = TrainingLog::default();
    if config.total_steps == 0 {
        return Ok(Trained { params, log });
    }

    let mut obs = env.reset(&mut rng)?;
    let mut episode_reward = 0.0;
    let mut steps = 0;
    while steps < config.total_steps {
        let n = config.n_steps.min(config.total_steps - steps);
        let mut buffer = RolloutBuffer::with_capacity(n);
        let mut finished = Vec::new();
        for _ in 0..n {
            let mean = params.mean_action(&obs)?;
            let value = params.value(&obs)?;
            let action = params.act(&obs, false, &mut rng)?;
            let log_prob = params.log_prob(mean.as_slice(), &action);
            let tr = env.step(&action)?;
            episode_reward += tr.reward;
            let next = if tr.done {
                finished.push(episode_reward);
                episode_reward = 0.0;
                env.reset(&mut rng)?
            } else {
                tr.observation
            };
            buffer.push(std::mem::replace(&mut obs, next), action, log_prob, tr.reward, value, tr.done);
        }
        steps += n;
        let bootstrap = params.value(&obs)?;
        gae_advantages(&mut buffer, config.gamma, config.gae_lambda, bootstrap)?;
        let stats = ppo_update(&mut params, &mut adam, &buffer, config, &mut rng)?;
        let record = TrainingRecord {
            update: log.records.len(),
            steps,
            mean_reward: buffer.rewards.iter().sum::<f64>() / n as f64,
            mean_episode_reward: if finished.is_empty() {
                f64::NAN
            } else {
                finished.iter().sum::<f64>() / finished.len() as f64
            },
            episodes: finished.len(),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            approx_kl: stats.approx_kl,
            clip_fraction: stats.clip_fraction,
            max_surrogate_gap: stats.max_surrogate_gap,
        };
        debug!("update {}: {:?}", record.update, record);
        log.records.push(record);
    }
    if let Some(last) = log.records.last() {
        info!(
            "trained {} steps in {} updates; final mean reward {:.4}",
            steps,
            log.records.len(),
            last.mean_reward
        );
    }
    Ok(Trained { params, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-armed bandit on a constant observation; arm 0 pays more.
    struct Bandit {
        t: usize,
        horizon: usize,
    }

    impl Environment for Bandit {
        fn obs_dim(&self) -> usize {
            2
        }

        fn action_dim(&self) -> usize {
            2
        }

        fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
            self.t = 0;
            Ok(vec![1.0, 0.0])
        }

        fn step(&mut self, action: &[f64]) -> Result<Transition> {
            self.t += 1;
            let w = crate::mvo::PortfolioWeights::softmax(action)?;
            Ok(Transition {
                observation: vec![1.0, 0.0],
                reward: w.as_slice()[0] - w.as_slice()[1],
                done: self.t >= self.horizon,
            })
        }
    }

    fn small_config(total: usize, seed: u64) -> PpoConfig {
        PpoConfig {
            n_steps: 256,
            minibatch: 32,
            epochs_per_update: 4,
            hidden: vec![8],
            total_steps: total,
            seed,
            ..PpoConfig::default()
        }
    }

    #[test]
    fn zero_steps_returns_initial_params() {
        let cfg = small_config(0, 7);
        let out = train(&mut Bandit { t: 0, horizon: 10 }, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fresh = PolicyParams::new(2, 2, &[8], &mut rng).unwrap();
        assert_eq!(out.params, fresh);
        assert!(out.log.records.is_empty());
    }

    #[test]
    fn same_seed_same_params() {
        let cfg = small_config(1024, 3);
        let a = train(&mut Bandit { t: 0, horizon: 20 }, &cfg).unwrap();
        let b = train(&mut Bandit { t: 0, horizon: 20 }, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn learns_the_better_arm() {
        let cfg = PpoConfig {
            learn_rate: 3e-3,
            ..small_config(20_000, 1)
        };
        let out = train(&mut Bandit { t: 0, horizon: 50 }, &cfg).unwrap();
        let a = out.params.act(&[1.0, 0.0], true, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(a[0] > a[1] + 1.0, "mean action {a:?}");
        let (first, last) = out.log.quartile_means().unwrap();
        assert!(last > first);
        assert!(out.log.records.iter().all(|r| r.max_surrogate_gap <= 0.0));
    }

    #[test]
    fn value_regression_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut params = PolicyParams::new(3, 2, &[16, 16], &mut rng).unwrap();
        let mut buffer = RolloutBuffer::default();
        for i in 0..64 {
            let x = i as f64 / 64.0;
            let obs = vec![x, x * x, 1.0 - x];
            let mean = params.mean_action(&obs).unwrap();
            let action = mean.as_slice().to_vec();
            let lp = params.log_prob(mean.as_slice(), &action);
            buffer.push(obs, action, lp, (3.0 * x).sin(), 0.0, i % 16 == 15);
        }
        gae_advantages(&mut buffer, 0.9, 0.9, 0.0).unwrap();
        // Freeze the policy: value-only objective, full-batch steps.
        let batch = Minibatch {
            observations: column_batch(&buffer.observations, &(0..64).collect::<Vec<_>>()),
            actions: column_batch(&buffer.actions, &(0..64).collect::<Vec<_>>()),
            old_log_probs: buffer.log_probs.clone(),
            advantages: vec![0.0; 64],
            returns: buffer.returns_to_go.clone(),
        };
        let coef = LossCoefficients {
            clip_eps: 0.2,
            value_coef: 1.0,
            entropy_coef: 0.0,
        };
        let mut adam = Adam::new(params.n_params(), 1e-3);
        let mut flat = params.flatten();
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let (parts, grad) = ppo_loss(&params, &batch, &coef, true);
            assert!(parts.value < prev, "value loss rose to {}", parts.value);
            prev = parts.value;
            adam.step(&mut flat, &grad);
            params.assign(&flat).unwrap();
        }
    }

    #[test]
    fn non_finite_update_restores_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = PolicyParams::new(2, 2, &[4], &mut rng).unwrap();
        let mut buffer = RolloutBuffer::default();
        for _ in 0..8 {
            buffer.push(vec![1.0, 0.0], vec![0.0, 0.0], 0.0, f64::NAN, 0.0, false);
        }
        gae_advantages(&mut buffer, 0.99, 0.95, 0.0).unwrap();
        let before = params.clone();
        let mut adam = Adam::new(params.n_params(), 3e-4);
        let err = ppo_update(&mut params, &mut adam, &buffer, &small_config(8, 0), &mut rng);
        assert!(matches!(err, Err(Error::Training(_))));
        assert_eq!(params, before);
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig::default().validate().is_ok());
        assert!(PpoConfig { clip_eps: 1.0, ..PpoConfig::default() }.validate().is_err());
        assert!(PpoConfig { gamma: 0.0, ..PpoConfig::default() }.validate().is_err());
    }
}
