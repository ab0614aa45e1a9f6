//! Evaluation metrics, ensembles, ablations and run configuration.

mod ablate;
mod config;
mod metrics;
mod pipeline;

pub use ablate::{ablate, write_ablation, AblationRow, Replicate, Variant};
pub use config::{AblateConfig, EvalConfig, ImitationConfig, Paths, QuerySetConfig, RunConfig, Seeds};
pub use metrics::{
    ensemble_eval, evaluate, recall_at_k, score_queue, thread_count, ActionCounts, EvalResult, EvalSetup,
    QueryEval, DEFAULT_KS, THREADS_ENV,
};
pub use pipeline::{
    create, eval_rollouts, evaluate_policy, open, policy_for, read_checkpoint, train_rl, train_sft,
    write_checkpoint, write_eval_csv, write_metrics, write_rollouts, RolloutRecord, World,
};
