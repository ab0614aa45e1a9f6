use super::PPOConfig;
use crate::error::{LabError, Result};
use crate::policy::{logprob_and_grad, value, value_grad, FeatureVector, PolicyParams, ValueParams};

/// One decision point with its sampling-time quantities and targets.
#[derive(Clone, Debug)]
pub struct Sample {
    pub features: FeatureVector,
    pub action_index: usize,
    pub logprob_old: f64,
    pub value_old: f64,
    pub ret: f64,
    pub advantage: f64,
}

#[derive(Clone, Debug)]
pub struct Losses {
    /// −mean(surrogate)
    pub policy: f64,
    pub value: f64,
    /// policy + η·value, the minimized objective.
    pub total: f64,
    pub grad_theta: Vec<f64>,
    pub grad_phi: Vec<f64>,
    pub surrogates: Vec<f64>,
    /// Per sample: the clipped branch was selected and the ratio lies
    /// outside [1−ε, 1+ε], so no gradient reaches θ.
    pub clipped: Vec<bool>,
}

/// min(ρÂ, clip(ρ, 1−ε, 1+ε)Â) and its derivative with respect to ρ.
pub fn surrogate(ratio: f64, adv: f64, eps: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, adv)
    } else {
        (clipped, 0.0)
    }
}

/// max((R−V)², (R−V_clip)²) with V_clip = clip(V, V_old−ε, V_old+ε), and
/// its derivative with respect to V.
pub fn clipped_value_loss(ret: f64, v: f64, v_old: f64, eps: f64) -> (f64, f64) {
    let v_clip = v.clamp(v_old - eps, v_old + eps);
    let plain = (ret - v) * (ret - v);
    let clip = (ret - v_clip) * (ret - v_clip);
    if plain >= clip {
        (plain, -2.0 * (ret - v))
    } else {
        // v_clip is constant in v here because the clip is active
        (clip, 0.0)
    }
}

/// Clipped policy and value losses over a batch with analytic gradients.
pub fn ppo_losses(
    samples: &[Sample],
    theta: &PolicyParams,
    phi: &ValueParams,
    cfg: &PPOConfig,
) -> Result<Losses> {
    if samples.is_empty() {
        return Err(LabError::Contract("empty training batch".into()));
    }
    let n = samples.len() as f64;
    let mut grad_theta = vec![0.0; theta.len()];
    let mut grad_phi = vec![0.0; phi.len()];
    let mut surrogates = Vec::with_capacity(samples.len());
    let mut clipped = Vec::with_capacity(samples.len());
    let mut value_sum = 0.0;

    for (i, s) in samples.iter().enumerate() {
        let (lp, g) = logprob_and_grad(theta, &s.features, s.action_index)?;
        let ratio = (lp - s.logprob_old).exp();
        if !ratio.is_finite() {
            return Err(LabError::Numeric(format!(
                "non-finite probability ratio at sample {i}"
            )));
        }
        let (surr, d_ratio) = surrogate(ratio, s.advantage, cfg.epsilon);
        surrogates.push(surr);
        clipped.push(d_ratio == 0.0 && (ratio - 1.0).abs() > cfg.epsilon);
        // d(−surr/n)/dθ = −(dsurr/dρ)·ρ·∇log π / n
        let w = -d_ratio * ratio / n;
        if w != 0.0 {
            for (acc, gi) in grad_theta.iter_mut().zip(&g) {
                *acc += w * gi;
            }
        }

        let v = value(phi, &s.features.state);
        let (lv, d_v) = clipped_value_loss(s.ret, v, s.value_old, cfg.epsilon);
        if !lv.is_finite() {
            return Err(LabError::Numeric(format!("non-finite value loss at sample {i}")));
        }
        value_sum += lv;
        if d_v != 0.0 {
            let w = cfg.eta * d_v / n;
            for (acc, gi) in grad_phi.iter_mut().zip(value_grad(phi, &s.features.state)) {
                *acc += w * gi;
            }
        }
    }

    let policy = -surrogates.iter().sum::<f64>() / n;
    let value_loss = value_sum / n;
    Ok(Losses {
        policy,
        value: value_loss,
        total: policy + cfg.eta * value_loss,
        grad_theta,
        grad_phi,
        surrogates,
        clipped,
    })
}

/// params ← params − lr·grad
pub fn sgd_step(params: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}
