use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::metrics::{ensemble_eval, rollout_seed, run_parallel, EvalResult, EvalSetup};
use crate::corpus::{gen_corpus, gen_queries_with, read_corpus, read_queries, Corpus, Query, QueryId};
use crate::env::{run_crawler, CrawlPolicy, Limits, TraceRecord};
use crate::error::{LabError, Result};
use crate::policy::{Checkpoint, Decoding, ParamPolicy, PolicyParams, PolicySnapshot, ValueParams};
use crate::trainer::{
    assign_rewards, bc_train, make_demos, ppo_train, BcOutcome, MetricsRow, RewardConfig, SampleSetup,
    TrainOutcome,
};

/// Corpus plus the train and eval query splits.
#[derive(Clone, Debug)]
pub struct World {
    pub corpus: Corpus,
    pub train: Vec<Query>,
    pub eval: Vec<Query>,
}

impl World {
    /// Generates the corpus, then `n_train + n_eval` queries split in order.
    pub fn generate(cfg: &RunConfig) -> Result<Self> {
        let corpus = gen_corpus(&cfg.corpus, cfg.seeds.corpus)?;
        let n = cfg.queries.n_train + cfg.queries.n_eval;
        let mut train = gen_queries_with(&corpus, &cfg.queries.generation(), n, cfg.seeds.queries)?;
        let eval = train.split_off(cfg.queries.n_train);
        Ok(World { corpus, train, eval })
    }

    /// Reads the files named in `cfg.paths`.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let p = &cfg.paths;
        let corpus = read_corpus(open(&p.corpus)?, &p.corpus.display().to_string())?;
        let train = read_queries(open(&p.train_queries)?, &p.train_queries.display().to_string())?;
        let eval = read_queries(open(&p.eval_queries)?, &p.eval_queries.display().to_string())?;
        if train.is_empty() || eval.is_empty() {
            return Err(LabError::Usage("query files must not be empty".into()));
        }
        Ok(World { corpus, train, eval })
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| LabError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| LabError::io(path, e))
}

/// Behavior cloning on demonstrations from the leading training queries.
pub fn train_sft(cfg: &RunConfig, world: &World) -> Result<BcOutcome> {
    let n = cfg.imitation.demo_queries.min(world.train.len());
    let bc = cfg.imitation.bc();
    let demos = make_demos(
        &world.corpus,
        &world.train[..n],
        &cfg.limits,
        &bc,
        cfg.seeds.demos,
    )?;
    bc_train(&demos, PolicyParams::zeros(cfg.model), &bc)
}

/// PPO from `sft` on the training queries.
pub fn train_rl(
    cfg: &RunConfig,
    world: &World,
    sft: &PolicySnapshot,
    on_checkpoint: &mut dyn FnMut(&Checkpoint) -> Result<()>,
) -> Result<TrainOutcome> {
    let setup = SampleSetup {
        corpus: &world.corpus,
        queries: &world.train,
        selector: &cfg.selector,
        reward: cfg.reward,
        ppo: cfg.ppo,
        limits: cfg.limits,
    };
    ppo_train(&setup, sft, ValueParams::zeros(), cfg.seeds.train, on_checkpoint)
}

/// Evaluates `params` on the eval split with `runs` crawls per query.
pub fn evaluate_policy(
    cfg: &RunConfig,
    world: &World,
    params: &PolicyParams,
    runs: usize,
) -> Result<EvalResult> {
    let policy = ParamPolicy::new(PolicySnapshot::new(params.clone()), cfg.eval.decoding);
    let setup = EvalSetup {
        policy: &policy,
        selector: &cfg.selector,
        corpus: &world.corpus,
        queries: &world.eval,
        limits: &cfg.limits,
        ks: &cfg.eval.ks,
    };
    ensemble_eval(&setup, runs, cfg.seeds.eval)
}

/// One line of `rollouts.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub query: QueryId,
    #[serde(flatten)]
    pub trace: TraceRecord,
    pub reward: f64,
}

/// Replays the first evaluation crawl of every query (same RNG streams as
/// [`evaluate_policy`]) and returns its transitions with rewards.
pub fn eval_rollouts(
    policy: &dyn CrawlPolicy,
    corpus: &Corpus,
    queries: &[Query],
    limits: &Limits,
    selector: &crate::selector::SelectorModel,
    reward: &RewardConfig,
    seed: u64,
) -> Result<Vec<RolloutRecord>> {
    let per_query = run_parallel(queries.len(), |i| {
        let query = &queries[i];
        let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed(seed, 0, i));
        let mut crawl = run_crawler(policy, query, corpus, limits, &mut rng)?;
        assign_rewards(&mut crawl.sessions, &crawl.queue, query, selector, reward);
        let mut out = Vec::new();
        for (session_idx, s) in crawl.sessions.iter().enumerate() {
            for t in &s.transitions {
                out.push(RolloutRecord {
                    query: query.id,
                    trace: TraceRecord {
                        session_idx,
                        kind: t.kind,
                        action: t.action,
                        new_papers: t.new_papers.clone(),
                        logprob_old: t.logprob_old,
                    },
                    reward: t.reward,
                });
            }
        }
        Ok(out)
    })?;
    Ok(per_query.into_iter().flatten().collect())
}

pub fn write_rollouts<W: Write>(records: &[RolloutRecord], w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| LabError::Contract(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| LabError::io("rollouts", e))?;
    }
    w.flush().map_err(|e| LabError::io("rollouts", e))
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)
            .map_err(|e| LabError::Contract(format!("metrics csv: {e}")))?;
    }
    csv.flush().map_err(|e| LabError::io("metrics.csv", e))
}

/// One CSV row per query, with a `recall_at_<k>` column per k.
pub fn write_eval_csv<W: Write>(result: &EvalResult, w: W) -> Result<()> {
    let err = |e: csv::Error| LabError::Contract(format!("eval csv: {e}"));
    let mut csv = csv::Writer::from_writer(w);
    let ks: Vec<usize> = result.recall_at_k.keys().copied().collect();
    let mut header: Vec<String> = [
        "query",
        "crawler_recall",
        "precision",
        "recall",
        "queue_len",
        "selected",
        "search",
        "expand",
        "truncated",
    ]
    .map(String::from)
    .to_vec();
    header.extend(ks.iter().map(|k| format!("recall_at_{k}")));
    csv.write_record(&header).map_err(err)?;
    for q in &result.per_query {
        let mut rec = vec![
            q.query.0.to_string(),
            q.crawler_recall.to_string(),
            q.precision.to_string(),
            q.recall.to_string(),
            q.queue_len.to_string(),
            q.selected.to_string(),
            q.actions.search.to_string(),
            q.actions.expand.to_string(),
            q.truncated.to_string(),
        ];
        rec.extend(
            ks.iter()
                .map(|k| q.recall_at_k.get(k).copied().unwrap_or(0.0).to_string()),
        );
        csv.write_record(&rec).map_err(err)?;
    }
    csv.flush().map_err(|e| LabError::io("eval csv", e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::read(open(path)?, &path.display().to_string())
}

pub fn write_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    ck.write(&mut w).map_err(|e| LabError::io(path, e))?;
    w.flush().map_err(|e| LabError::io(path, e))
}

/// Greedy decoding is exposed for ensembles of a deterministic policy.
pub fn policy_for(params: &PolicyParams, decoding: Decoding) -> ParamPolicy {
    ParamPolicy::new(PolicySnapshot::new(params.clone()), decoding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{write_corpus, write_queries};
    use crate::env::Action;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.corpus.n_papers = 300;
        cfg.queries.n_train = 8;
        cfg.queries.n_eval = 4;
        cfg.imitation.demo_queries = 4;
        cfg.imitation.epochs = 5;
        cfg.ppo.total_steps = 3;
        cfg.ppo.policy_freeze_steps = 1;
        cfg.ppo.learning_rate = 0.01;
        cfg.ppo.value_learning_rate = 0.001;
        cfg
    }

    #[test]
    fn generate_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.paths.corpus = dir.path().join("c.jsonl");
        cfg.paths.train_queries = dir.path().join("t.jsonl");
        cfg.paths.eval_queries = dir.path().join("e.jsonl");
        let w = World::generate(&cfg).unwrap();
        assert_eq!((w.train.len(), w.eval.len()), (8, 4));
        write_corpus(&w.corpus, create(&cfg.paths.corpus).unwrap()).unwrap();
        write_queries(&w.train, create(&cfg.paths.train_queries).unwrap()).unwrap();
        write_queries(&w.eval, create(&cfg.paths.eval_queries).unwrap()).unwrap();
        let back = World::load(&cfg).unwrap();
        assert_eq!(back.corpus.papers(), w.corpus.papers());
        assert_eq!(back.train, w.train);
        assert_eq!(back.eval, w.eval);
    }

    #[test]
    fn missing_file_is_data_error() {
        let mut cfg = small();
        cfg.paths.corpus = "/nonexistent/c.jsonl".into();
        let err = World::load(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn pipeline_runs_end_to_end() {
        let cfg = small();
        let w = World::generate(&cfg).unwrap();
        let sft = train_sft(&cfg, &w).unwrap();
        assert!(sft.nll.last().unwrap() < &sft.nll[0]);
        let out = train_rl(&cfg, &w, &sft.policy, &mut |_| Ok(())).unwrap();
        assert_eq!(out.metrics.len(), 3);
        let r = evaluate_policy(&cfg, &w, &out.policy, 1).unwrap();
        assert_eq!(r.per_query.len(), 4);
        let mut buf = Vec::new();
        write_metrics(&out.metrics, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,phase,mean_return,mean_kl,mean_actions,policy_loss,value_loss\n"));
        assert_eq!(text.lines().count(), 4);
        let mut buf = Vec::new();
        write_eval_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("query,crawler_recall,"));
        assert!(text.lines().next().unwrap().ends_with(",recall_at_100"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn rollouts_match_evaluation_counts() {
        let cfg = small();
        let w = World::generate(&cfg).unwrap();
        let sft = train_sft(&cfg, &w).unwrap();
        let r = evaluate_policy(&cfg, &w, sft.policy.params(), 1).unwrap();
        let policy = policy_for(sft.policy.params(), cfg.eval.decoding);
        let recs = eval_rollouts(
            &policy,
            &w.corpus,
            &w.eval,
            &cfg.limits,
            &cfg.selector,
            &cfg.reward,
            cfg.seeds.eval,
        )
        .unwrap();
        let expands = recs
            .iter()
            .filter(|r| matches!(r.trace.action, Action::Expand(_)))
            .count();
        let searches = recs
            .iter()
            .filter(|r| matches!(r.trace.action, Action::Search(_)))
            .count();
        assert_eq!((searches, expands), (r.actions.search, r.actions.expand));
        let mut buf = Vec::new();
        write_rollouts(&recs, &mut buf).unwrap();
        let first: RolloutRecord =
            serde_json::from_str(String::from_utf8(buf).unwrap().lines().next().unwrap()).unwrap();
        assert_eq!(first, recs[0]);
    }
}
