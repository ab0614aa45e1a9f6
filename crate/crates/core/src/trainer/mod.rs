//! Training pipeline: rewards, session returns, clipped PPO losses,
//! behavior cloning of oracle demonstrations, batch sampling and the
//! value-warmup-then-joint training loop.

mod bc;
mod ppo;
mod returns;
mod reward;
mod sample;
mod train;

pub use bc::{bc_train, demo_nll, make_demos, pick_sections, BcConfig, BcOutcome, Demo, DemoSet};
pub use ppo::{clipped_value_loss, ppo_losses, sgd_step, surrogate, Losses, Sample};
pub use returns::{advantages, session_returns};
pub use reward::{assign_rewards, reward};
pub use sample::{sample_step, SampleSetup, TrainBatch};
pub use train::{ppo_train, MetricsRow, Phase, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::env::ActionType;
use crate::error::{LabError, Result};

/// Per-action-type costs c(a).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionCosts {
    pub search: f64,
    pub expand: f64,
    pub stop: f64,
}

impl Default for ActionCosts {
    fn default() -> Self {
        ActionCosts {
            search: 0.1,
            expand: 0.1,
            stop: 0.0,
        }
    }
}

impl ActionCosts {
    pub fn of(&self, kind: ActionType) -> f64 {
        match kind {
            ActionType::Search => self.search,
            ActionType::Expand => self.expand,
            ActionType::Stop => self.stop,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub alpha: f64,
    pub cost: ActionCosts,
    /// When false the indicator only credits known answers, ignoring the
    /// selector's judgement.
    pub selector_reward: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 1.5,
            cost: ActionCosts::default(),
            selector_reward: true,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(LabError::config("alpha", "must be positive"));
        }
        for (field, c) in [
            ("cost.search", self.cost.search),
            ("cost.expand", self.cost.expand),
            ("cost.stop", self.cost.stop),
        ] {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(LabError::config(field, "must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PPOConfig {
    pub gamma0: f64,
    pub gamma1: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub eta: f64,
    /// SGD step size for θ.
    pub learning_rate: f64,
    /// SGD step size for φ; the value loss is scaled by η and its features
    /// are unnormalized, so it usually wants a smaller step than θ.
    pub value_learning_rate: f64,
    pub epochs_per_step: usize,
    pub queries_per_step: usize,
    pub expand_sessions_per_wave: usize,
    pub policy_freeze_steps: usize,
    pub total_steps: usize,
    pub normalize_advantages: bool,
    /// Write a checkpoint every this many steps; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for PPOConfig {
    fn default() -> Self {
        PPOConfig {
            gamma0: 1.0,
            gamma1: 0.1,
            beta: 0.1,
            epsilon: 0.2,
            eta: 10.0,
            learning_rate: 1e-6,
            value_learning_rate: 1e-6,
            epochs_per_step: 2,
            queries_per_step: 4,
            expand_sessions_per_wave: 6,
            policy_freeze_steps: 50,
            total_steps: 250,
            normalize_advantages: false,
            checkpoint_every: 0,
        }
    }
}

impl PPOConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("gamma0", self.gamma0), ("gamma1", self.gamma1)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(LabError::config(field, "must lie in [0, 1]"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(LabError::config("epsilon", "must lie in (0, 1)"));
        }
        for (field, v) in [
            ("beta", self.beta),
            ("eta", self.eta),
            ("learning_rate", self.learning_rate),
            ("value_learning_rate", self.value_learning_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(LabError::config(field, "must be non-negative"));
            }
        }
        for (field, v) in [
            ("epochs_per_step", self.epochs_per_step),
            ("queries_per_step", self.queries_per_step),
            ("expand_sessions_per_wave", self.expand_sessions_per_wave),
            ("total_steps", self.total_steps),
        ] {
            if v == 0 {
                return Err(LabError::config(field, "must be at least 1"));
            }
        }
        Ok(())
    }
}
