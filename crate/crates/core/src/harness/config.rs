use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusConfig, QueryConfig};
use crate::env::Limits;
use crate::error::{LabError, Result};
use crate::policy::{Architecture, Decoding};
use crate::selector::SelectorModel;
use crate::trainer::{BcConfig, PPOConfig, RewardConfig};

use super::metrics::DEFAULT_KS;

/// Explicit seeds for every random stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub corpus: u64,
    pub queries: u64,
    pub demos: u64,
    pub train: u64,
    pub eval: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            corpus: 1,
            queries: 2,
            demos: 3,
            train: 4,
            eval: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySetConfig {
    pub n_train: usize,
    pub n_eval: usize,
    pub query_keywords: usize,
    pub relevance_threshold: f64,
    pub min_source_fraction: f64,
    pub min_answers: usize,
    pub max_retries: usize,
}

impl Default for QuerySetConfig {
    fn default() -> Self {
        let g = QueryConfig::default();
        QuerySetConfig {
            n_train: 200,
            n_eval: 50,
            query_keywords: g.query_keywords,
            relevance_threshold: g.relevance_threshold,
            min_source_fraction: g.min_source_fraction,
            min_answers: g.min_answers,
            max_retries: g.max_retries,
        }
    }
}

impl QuerySetConfig {
    pub fn generation(&self) -> QueryConfig {
        QueryConfig {
            query_keywords: self.query_keywords,
            relevance_threshold: self.relevance_threshold,
            min_source_fraction: self.min_source_fraction,
            min_answers: self.min_answers,
            max_retries: self.max_retries,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImitationConfig {
    /// Demonstrations come from this many leading training queries.
    pub demo_queries: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub expand_sessions_per_query: usize,
}

impl Default for ImitationConfig {
    fn default() -> Self {
        let b = BcConfig::default();
        ImitationConfig {
            demo_queries: 20,
            epochs: b.epochs,
            learning_rate: b.learning_rate,
            expand_sessions_per_query: b.expand_sessions_per_query,
        }
    }
}

impl ImitationConfig {
    pub fn bc(&self) -> BcConfig {
        BcConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            expand_sessions_per_query: self.expand_sessions_per_query,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub decoding: Decoding,
    pub ensemble_runs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: DEFAULT_KS.to_vec(),
            decoding: Decoding::Sample,
            ensemble_runs: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub variants: Vec<String>,
    pub alphas: Vec<f64>,
    pub costs: Vec<f64>,
    /// Training runs per configuration, each with derived seeds; rows
    /// report their means.
    pub replicates: usize,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            variants: [
                "no-expand",
                "no-rl",
                "exact-set-reward",
                "alpha-sweep",
                "cost-sweep",
            ]
            .map(String::from)
            .to_vec(),
            alphas: vec![0.5, 1.0, 1.5, 2.0],
            costs: vec![0.0, 0.05, 0.1, 0.2],
            replicates: 1,
        }
    }
}

/// File locations, resolved against the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out_dir: PathBuf,
    pub corpus: PathBuf,
    pub train_queries: PathBuf,
    pub eval_queries: PathBuf,
    pub sft_checkpoint: PathBuf,
    pub checkpoint: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            out_dir: "out".into(),
            corpus: "out/corpus.jsonl".into(),
            train_queries: "out/train_queries.jsonl".into(),
            eval_queries: "out/eval_queries.jsonl".into(),
            sft_checkpoint: "out/sft.json".into(),
            checkpoint: "out/checkpoint.json".into(),
        }
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.out_dir,
            &mut self.corpus,
            &mut self.train_queries,
            &mut self.eval_queries,
            &mut self.sft_checkpoint,
            &mut self.checkpoint,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// One experiment's complete configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub seeds: Seeds,
    pub model: Architecture,
    pub corpus: CorpusConfig,
    pub queries: QuerySetConfig,
    pub limits: Limits,
    pub selector: SelectorModel,
    pub reward: RewardConfig,
    pub ppo: PPOConfig,
    pub imitation: ImitationConfig,
    pub eval: EvalConfig,
    pub ablate: AblateConfig,
}

impl RunConfig {
    /// Parses TOML text; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path, source_name: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            LabError::config(source_name, format!("line {line}: {}", e.message()))
        })?;
        cfg.paths.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml(&text, base, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.limits.validate()?;
        self.selector.validate()?;
        self.reward.validate()?;
        self.ppo.validate()?;
        if self.queries.n_train < self.ppo.queries_per_step {
            return Err(LabError::config(
                "queries.n_train",
                "must be at least ppo.queries_per_step",
            ));
        }
        if self.queries.n_eval == 0 {
            return Err(LabError::config("queries.n_eval", "must be at least 1"));
        }
        if self.imitation.demo_queries == 0 || self.imitation.demo_queries > self.queries.n_train {
            return Err(LabError::config(
                "imitation.demo_queries",
                "must lie in 1..=queries.n_train",
            ));
        }
        if self.ablate.replicates == 0 {
            return Err(LabError::config("ablate.replicates", "must be at least 1"));
        }
        if self.eval.ensemble_runs == 0 {
            return Err(LabError::config("eval.ensemble_runs", "must be at least 1"));
        }
        Ok(())
    }
}
