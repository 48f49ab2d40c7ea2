//! Tanh MLPs with hand-written backpropagation, and the Gaussian
//! actor / value critic pair built from them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const POLICY_GAIN: f64 = 0.01;
const VALUE_GAIN: f64 = 1.0;

/// `y = W x + b`, with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    fn orthogonal<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        Self {
            weight: orthogonal_matrix(outputs, inputs, rng) * gain,
            bias: DVector::zeros(outputs),
        }
    }

    pub fn n_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// A `rows × cols` matrix with orthonormal rows or columns (whichever is fewer).
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let g = DMatrix::from_fn(tall, short, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    // Sign fix so the distribution is uniform over orthogonal matrices.
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rows >= cols {
        q
    } else {
        q.transpose()
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input followed by each hidden layer's tanh output.
    activations: Vec<DMatrix<f64>>,
}

/// Tanh hidden layers, linear output. Inputs are column-stacked samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    fn new<R: Rng + ?Sized>(inputs: usize, hidden: &[usize], outputs: usize, out_gain: f64, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = inputs;
        for &h in hidden {
            layers.push(Dense::orthogonal(prev, h, HIDDEN_GAIN, rng));
            prev = h;
        }
        layers.push(Dense::orthogonal(prev, outputs, out_gain, rng));
        Self { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("at least one layer").weight.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    fn affine(layer: &Dense, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &layer.weight * x;
        for mut col in z.column_iter_mut() {
            col += &layer.bias;
        }
        z
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, MlpCache) {
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            let next = Self::affine(layer, &h).map(f64::tanh);
            activations.push(h);
            h = next;
        }
        let out = Self::affine(&self.layers[last], &h);
        activations.push(h);
        (out, MlpCache { activations })
    }

    /// Parameter gradients given `∂L/∂output`, in the same order as
    /// [`Mlp::write_params`].
    pub fn backward(&self, cache: &MlpCache, grad_out: &DMatrix<f64>, out: &mut Vec<f64>) {
        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[k];
            let dw = &delta * input.transpose();
            let db = DVector::from_iterator(delta.nrows(), delta.row_iter().map(|r| r.sum()));
            grads.push((dw, db));
            if k > 0 {
                let mut back = layer.weight.transpose() * &delta;
                back.zip_apply(input, |g, h| *g *= 1.0 - h * h);
                delta = back;
            }
        }
        for (dw, db) in grads.iter().rev() {
            out.extend_from_slice(dw.as_slice());
            out.extend_from_slice(db.as_slice());
        }
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(layer.bias.as_slice());
        }
    }

    fn read_params(&mut self, src: &[f64]) -> usize {
        let mut pos = 0;
        for layer in &mut self.layers {
            let nw = layer.weight.len();
            layer.weight.as_mut_slice().copy_from_slice(&src[pos..pos + nw]);
            pos += nw;
            let nb = layer.bias.len();
            layer.bias.as_mut_slice().copy_from_slice(&src[pos..pos + nb]);
            pos += nb;
        }
        pos
    }
}

/// Diagonal-Gaussian policy (state-independent log-std) and value function.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub log_std: DVector<f64>,
    pub critic: Mlp,
}

impl PolicyParams {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        if obs_dim == 0 || action_dim == 0 || hidden.contains(&0) {
            return Err(Error::InvalidInput("network dimensions must be positive".into()));
        }
        let actor = Mlp::new(obs_dim, hidden, action_dim, POLICY_GAIN, rng);
        let critic = Mlp::new(obs_dim, hidden, 1, VALUE_GAIN, rng);
        Ok(Self {
            actor,
            log_std: DVector::zeros(action_dim),
            critic,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.inputs()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.outputs()
    }

    pub fn n_params(&self) -> usize {
        self.actor.n_params() + self.log_std.len() + self.critic.n_params()
    }

    /// All parameters in a fixed order: actor layers (weights column-major,
    /// then bias), log-std, critic layers.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.actor.write_params(&mut out);
        out.extend_from_slice(self.log_std.as_slice());
        self.critic.write_params(&mut out);
        out
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                actual: flat.len(),
            });
        }
        let mut pos = self.actor.read_params(flat);
        let n = self.log_std.len();
        self.log_std.as_mut_slice().copy_from_slice(&flat[pos..pos + n]);
        pos += n;
        self.critic.read_params(&flat[pos..]);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }

    pub fn clamp_log_std(&mut self) {
        self.log_std.apply(|v| *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim(),
                actual: obs.len(),
            });
        }
        Ok(())
    }

    pub fn mean_action(&self, obs: &[f64]) -> Result<DVector<f64>> {
        self.check_obs(obs)?;
        let x = DMatrix::from_column_slice(obs.len(), 1, obs);
        Ok(self.actor.forward(&x).0.column(0).into_owned())
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        self.check_obs(obs)?;
        let x = DMatrix::from_column_slice(obs.len(), 1, obs);
        Ok(self.critic.forward(&x).0[(0, 0)])
    }

    /// Actor mean when `deterministic`, otherwise a draw from the policy.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], deterministic: bool, rng: &mut R) -> Result<Vec<f64>> {
        let mean = self.mean_action(obs)?;
        if deterministic {
            return Ok(mean.as_slice().to_vec());
        }
        Ok(mean
            .iter()
            .zip(self.log_std.iter())
            .map(|(m, ls)| {
                let eps: f64 = StandardNormal.sample(rng);
                m + ls.exp() * eps
            })
            .collect())
    }

    /// `log π(action | obs)` for the diagonal Gaussian.
    pub fn log_prob(&self, mean: &[f64], action: &[f64]) -> f64 {
        gaussian_log_prob(mean, self.log_std.as_slice(), action)
    }

    /// Entropy of the action distribution (independent of the state).
    pub fn entropy(&self) -> f64 {
        let c = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        self.log_std.iter().map(|ls| ls + c).sum()
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - half_log_2pi
        })
        .sum()
}
