use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ppo::{ppo_losses, sgd_step, Sample};
use super::sample::{sample_step, SampleSetup};
use crate::error::{LabError, Result};
use crate::policy::{kl_divergence, Checkpoint, PolicyParams, PolicySnapshot, ValueParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// θ frozen, only φ updated.
    ValueOnly,
    Joint,
}

/// One line of the training metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub phase: Phase,
    /// Mean undiscounted reward per sampled session.
    pub mean_return: f64,
    /// Mean KL(π_θ ‖ π_sft) over the batch's decision points, after the update.
    pub mean_kl: f64,
    /// Mean crawler actions (Stop excluded) per sampled session.
    pub mean_actions: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub policy: PolicyParams,
    pub value: ValueParams,
    pub metrics: Vec<MetricsRow>,
    pub short_batches: usize,
}

fn normalize(samples: &mut [Sample]) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-8);
    for s in samples {
        s.advantage = (s.advantage - mean) / sd;
    }
}

fn mean_kl(theta: &PolicyParams, sft: &PolicyParams, samples: &[Sample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        total += kl_divergence(theta, sft, &s.features)?;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Runs PPO from π_sft: `policy_freeze_steps` value-only steps, then joint
/// updates until `total_steps`.
///
/// `on_checkpoint` is called every `checkpoint_every` steps. A non-finite
/// loss or parameter aborts with [`LabError::Diverged`] carrying the last
/// finite parameters.
pub fn ppo_train(
    setup: &SampleSetup<'_>,
    sft: &PolicySnapshot,
    value_init: ValueParams,
    seed: u64,
    on_checkpoint: &mut dyn FnMut(&Checkpoint) -> Result<()>,
) -> Result<TrainOutcome> {
    let cfg = setup.ppo;
    cfg.validate()?;
    setup.reward.validate()?;
    setup.limits.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = sft.params().clone();
    let mut phi = value_init;
    let mut metrics = Vec::with_capacity(cfg.total_steps);
    let mut short_batches = 0;
    let mut last_good = Checkpoint::new(&theta, &phi, 0);

    for step in 1..=cfg.total_steps {
        let diverged = |reason: String, last_good: &Checkpoint| LabError::Diverged {
            step,
            reason,
            last_good: Some(Box::new(last_good.clone())),
        };
        let phase = if step <= cfg.policy_freeze_steps {
            Phase::ValueOnly
        } else {
            Phase::Joint
        };
        let snapshot = PolicySnapshot::new(theta.clone());
        let mut batch = sample_step(setup, &snapshot, &phi, sft, &mut rng)?;
        short_batches += usize::from(batch.short);
        if cfg.normalize_advantages {
            normalize(&mut batch.samples);
        }

        let mut first = None;
        for _ in 0..cfg.epochs_per_step {
            let losses = match ppo_losses(&batch.samples, &theta, &phi, &cfg) {
                Ok(l) if l.total.is_finite() => l,
                Ok(_) => return Err(diverged("non-finite loss".into(), &last_good)),
                Err(LabError::Numeric(m)) => return Err(diverged(m, &last_good)),
                Err(e) => return Err(e),
            };
            if phase == Phase::Joint {
                sgd_step(theta.as_mut_slice(), &losses.grad_theta, cfg.learning_rate);
            }
            sgd_step(phi.as_mut_slice(), &losses.grad_phi, cfg.value_learning_rate);
            first.get_or_insert((losses.policy, losses.value));
        }
        if !theta.is_finite() || phi.as_slice().iter().any(|w| !w.is_finite()) {
            return Err(diverged("non-finite parameters after update".into(), &last_good));
        }
        let (policy_loss, value_loss) = first.expect("at least one epoch");
        let n_sessions = batch.sessions.len() as f64;
        metrics.push(MetricsRow {
            step,
            phase,
            mean_return: batch.mean_session_reward(),
            mean_kl: mean_kl(&theta, sft, &batch.samples)?,
            mean_actions: batch.crawler_actions() as f64 / n_sessions,
            policy_loss,
            value_loss,
        });
        last_good = Checkpoint::new(&theta, &phi, step);
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            on_checkpoint(&last_good)?;
        }
    }
    Ok(TrainOutcome {
        policy: theta,
        value: phi,
        metrics,
        short_batches,
    })
}
