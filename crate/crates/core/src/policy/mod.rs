//! The differentiable stand-in for the language-model policy: featurizer,
//! softmax policy π_θ over legal actions and linear value function V_φ.

mod checkpoint;
mod features;
mod model;

pub use checkpoint::Checkpoint;
pub use features::{featurize, state_features, FeatureVector, ACTION_DIM, HIST_BUCKETS, STATE_DIM};
pub use model::{
    action_dist, argmax, kl_divergence, log_prob, logprob_and_grad, sample_action, value, value_grad,
    Architecture, PolicyParams, PolicySnapshot, ValueParams,
};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::{CrawlPolicy, DecisionContext};
use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoding {
    #[default]
    Sample,
    Greedy,
}

/// A parametric policy driving the crawler.
#[derive(Clone, Debug)]
pub struct ParamPolicy {
    pub params: PolicySnapshot,
    pub decoding: Decoding,
}

impl ParamPolicy {
    pub fn new(params: PolicySnapshot, decoding: Decoding) -> Self {
        ParamPolicy { params, decoding }
    }
}

impl CrawlPolicy for ParamPolicy {
    fn choose(&self, ctx: &DecisionContext<'_, '_>, rng: &mut dyn RngCore) -> Result<(usize, f64)> {
        let dist = action_dist(&self.params, ctx.features)?;
        let i = match self.decoding {
            Decoding::Sample => sample_action(&dist, rng),
            Decoding::Greedy => argmax(&dist),
        };
        Ok((i, log_prob(&self.params, ctx.features, i)?))
    }
}
