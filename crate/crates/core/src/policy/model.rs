use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, ACTION_DIM, STATE_DIM};
use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    /// score(a) = w . x(a) + b
    #[default]
    Linear,
    /// score(a) = w2 . tanh(W1 x(a) + b1) + b2
    Mlp { hidden: usize },
}

/// Policy parameters θ, stored flat so optimizers can treat them as one
/// vector.
///
/// Layout: linear `[w (input_dim), b]`; mlp
/// `[W1 (hidden x input_dim, row major), b1 (hidden), w2 (hidden), b2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    arch: Architecture,
    input_dim: usize,
    theta: Vec<f64>,
}

impl PolicyParams {
    fn param_count(arch: Architecture, input_dim: usize) -> usize {
        match arch {
            Architecture::Linear => input_dim + 1,
            Architecture::Mlp { hidden } => hidden * input_dim + 2 * hidden + 1,
        }
    }

    pub fn zeros(arch: Architecture) -> Self {
        Self::zeros_with_dim(arch, ACTION_DIM)
    }

    pub fn zeros_with_dim(arch: Architecture, input_dim: usize) -> Self {
        PolicyParams {
            arch,
            input_dim,
            theta: vec![0.0; Self::param_count(arch, input_dim)],
        }
    }

    /// Uniform(-scale, scale) entries.
    pub fn random(arch: Architecture, input_dim: usize, scale: f64, rng: &mut dyn RngCore) -> Self {
        let mut p = Self::zeros_with_dim(arch, input_dim);
        for t in &mut p.theta {
            *t = rng.gen_range(-scale..=scale);
        }
        p
    }

    pub fn from_flat(arch: Architecture, input_dim: usize, theta: Vec<f64>) -> Result<Self> {
        let want = Self::param_count(arch, input_dim);
        if theta.len() != want {
            return Err(LabError::Contract(format!(
                "policy expects {want} parameters, got {}",
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(LabError::Numeric("non-finite policy parameter".into()));
        }
        Ok(PolicyParams {
            arch,
            input_dim,
            theta,
        })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        match self.arch {
            Architecture::Linear => vec![self.input_dim],
            Architecture::Mlp { hidden } => vec![self.input_dim, hidden],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|t| t.is_finite())
    }

    /// Unnormalized score of one action row.
    pub fn score(&self, x: &[f64]) -> f64 {
        let d = self.input_dim;
        match self.arch {
            Architecture::Linear => dot(&self.theta[..d], x) + self.theta[d],
            Architecture::Mlp { hidden } => {
                let (w1, rest) = self.theta.split_at(hidden * d);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                let mut s = b2[0];
                for k in 0..hidden {
                    s += w2[k] * (dot(&w1[k * d..(k + 1) * d], x) + b1[k]).tanh();
                }
                s
            }
        }
    }

    /// Adds `weight * d score(x) / d theta` into `grad`.
    fn accumulate_score_grad(&self, x: &[f64], weight: f64, grad: &mut [f64]) {
        let d = self.input_dim;
        match self.arch {
            Architecture::Linear => {
                for (g, xi) in grad[..d].iter_mut().zip(x) {
                    *g += weight * xi;
                }
                grad[d] += weight;
            }
            Architecture::Mlp { hidden } => {
                let w1 = &self.theta[..hidden * d];
                let b1 = &self.theta[hidden * d..hidden * d + hidden];
                let w2 = &self.theta[hidden * d + hidden..hidden * d + 2 * hidden];
                let off_b1 = hidden * d;
                let off_w2 = off_b1 + hidden;
                for k in 0..hidden {
                    let h = (dot(&w1[k * d..(k + 1) * d], x) + b1[k]).tanh();
                    grad[off_w2 + k] += weight * h;
                    let back = weight * w2[k] * (1.0 - h * h);
                    grad[off_b1 + k] += back;
                    for (g, xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *g += back * xi;
                    }
                }
                grad[off_w2 + hidden] += weight;
            }
        }
    }

    pub fn scores(&self, fv: &FeatureVector) -> Vec<f64> {
        fv.actions.iter().map(|x| self.score(x)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(LabError::Numeric(format!("non-finite score for action {i}")));
    }
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    Ok(scores.iter().map(|s| s - lse).collect())
}

/// Softmax over the scores of the legal actions.
pub fn action_dist(params: &PolicyParams, fv: &FeatureVector) -> Result<Vec<f64>> {
    if fv.actions.is_empty() {
        return Err(LabError::Contract("no legal actions".into()));
    }
    Ok(log_softmax(&params.scores(fv))?
        .into_iter()
        .map(f64::exp)
        .collect())
}

pub fn log_prob(params: &PolicyParams, fv: &FeatureVector, action: usize) -> Result<f64> {
    let lp = log_softmax(&params.scores(fv))?;
    lp.get(action)
        .copied()
        .ok_or_else(|| LabError::Contract(format!("action {action} outside {} legal", lp.len())))
}

/// log π(a|s) and its gradient with respect to θ:
/// ∇ log π(a) = ∇ score(a) - Σ_b π(b) ∇ score(b).
pub fn logprob_and_grad(params: &PolicyParams, fv: &FeatureVector, action: usize) -> Result<(f64, Vec<f64>)> {
    let lp = log_softmax(&params.scores(fv))?;
    if action >= lp.len() {
        return Err(LabError::Contract(format!(
            "action {action} outside {} legal",
            lp.len()
        )));
    }
    let mut grad = vec![0.0; params.len()];
    params.accumulate_score_grad(&fv.actions[action], 1.0, &mut grad);
    for (b, x) in fv.actions.iter().enumerate() {
        params.accumulate_score_grad(x, -lp[b].exp(), &mut grad);
    }
    Ok((lp[action], grad))
}

/// KL(p ‖ q) between two policies' distributions at one decision point.
pub fn kl_divergence(p: &PolicyParams, q: &PolicyParams, fv: &FeatureVector) -> Result<f64> {
    let lp = log_softmax(&p.scores(fv))?;
    let lq = log_softmax(&q.scores(fv))?;
    Ok(lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum())
}

/// Draws an index from a probability vector by inverse CDF.
pub fn sample_action(dist: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the total: last index with mass
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// First index of the largest entry.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Value-function parameters φ: a linear map over the state features.
/// Layout `[w (STATE_DIM), b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueParams {
    weights: Vec<f64>,
}

impl ValueParams {
    pub fn zeros() -> Self {
        ValueParams {
            weights: vec![0.0; STATE_DIM + 1],
        }
    }

    pub fn from_flat(weights: Vec<f64>) -> Result<Self> {
        if weights.len() != STATE_DIM + 1 {
            return Err(LabError::Contract(format!(
                "value expects {} parameters, got {}",
                STATE_DIM + 1,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(LabError::Numeric("non-finite value parameter".into()));
        }
        Ok(ValueParams { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

pub fn value(params: &ValueParams, state: &[f64]) -> f64 {
    let d = params.weights.len() - 1;
    dot(&params.weights[..d], state) + params.weights[d]
}

/// ∂V/∂φ, which for the linear map is the state vector plus a bias 1.
pub fn value_grad(params: &ValueParams, state: &[f64]) -> Vec<f64> {
    let mut g = Vec::with_capacity(params.len());
    g.extend_from_slice(&state[..params.len() - 1]);
    g.push(1.0);
    g
}

/// A frozen copy of policy parameters, cheap to share across workers.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySnapshot(Arc<PolicyParams>);

impl PolicySnapshot {
    pub fn new(params: PolicyParams) -> Self {
        PolicySnapshot(Arc::new(params))
    }

    pub fn params(&self) -> &PolicyParams {
        &self.0
    }
}

impl std::ops::Deref for PolicySnapshot {
    type Target = PolicyParams;

    fn deref(&self) -> &PolicyParams {
        &self.0
    }
}
