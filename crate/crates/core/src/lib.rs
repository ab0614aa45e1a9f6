//! A desk-scale laboratory for a paper-search crawler trained with
//! session-level PPO.
//!
//! The crawler walks a synthetic citation corpus with three actions
//! (`Search`, `Expand`, `Stop`), appending papers to a FIFO paper queue.
//! Trajectories are cut into sessions that end in `Stop`; each session
//! starts either from the bare query or from the query plus one queued
//! paper. Training credits a step for the sessions it spawns by
//! bootstrapping the value of every newly queued paper.
//!
//! Module map:
//! - [`corpus`]: synthetic papers, queries and their JSON-lines formats
//! - [`env`]: the crawler MDP, paper queue and full-crawl rollouts
//! - [`selector`]: relevance oracle and the reward indicator
//! - [`policy`]: featurizer, softmax policy, value function, checkpoints
//! - [`trainer`]: rewards, returns, clipped losses, imitation and PPO loops
//! - [`harness`]: metrics, ensembles, ablations and run configuration

pub mod corpus;
pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod selector;
pub mod trainer;

pub use error::{LabError, Result};

/// Mixes a base seed with a stream index (splitmix64 finalizer).
///
/// Used wherever independent, reproducible sub-streams are needed, for
/// example one RNG per query during parallel evaluation.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    if stream == 0 {
        return seed;
    }
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
