use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PaperId, Query, QueryId};
use crate::derive_seed;
use crate::env::{run_crawler, ActionType, CrawlPolicy, CrawlResult, Limits};
use crate::error::{LabError, Result};
use crate::selector::{Decision, SelectorModel};

pub const DEFAULT_KS: [usize; 3] = [20, 50, 100];

/// Environment variable capping evaluation worker threads.
pub const THREADS_ENV: &str = "PASA_LAB_THREADS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCounts {
    pub search: usize,
    pub expand: usize,
    pub stop: usize,
}

impl ActionCounts {
    /// Search plus Expand; Stop is bookkeeping, not crawling.
    pub fn crawler(&self) -> usize {
        self.search + self.expand
    }

    fn add(&mut self, other: &ActionCounts) {
        self.search += other.search;
        self.expand += other.expand;
        self.stop += other.stop;
    }

    fn of(crawl: &CrawlResult) -> Self {
        let mut c = ActionCounts::default();
        for t in crawl.sessions.iter().flat_map(|s| &s.transitions) {
            match t.action.kind() {
                ActionType::Search => c.search += 1,
                ActionType::Expand => c.expand += 1,
                ActionType::Stop => c.stop += 1,
            }
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub query: QueryId,
    pub crawler_recall: f64,
    pub precision: f64,
    pub recall: f64,
    pub recall_at_k: BTreeMap<usize, f64>,
    pub queue_len: usize,
    pub selected: usize,
    pub actions: ActionCounts,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub crawler_recall: f64,
    pub precision: f64,
    pub recall: f64,
    pub recall_at_k: BTreeMap<usize, f64>,
    /// Mean crawler actions (Search + Expand) per query.
    pub mean_actions: f64,
    pub actions: ActionCounts,
    pub per_query: Vec<QueryEval>,
}

/// |top-k ∩ answers| / |answers| over a ranked list.
pub fn recall_at_k(ranked: &[PaperId], answers: &BTreeSet<PaperId>, k: usize) -> Result<f64> {
    if answers.is_empty() {
        return Err(LabError::Contract("recall@k with an empty answer set".into()));
    }
    let hits = ranked.iter().take(k).filter(|p| answers.contains(p)).count();
    Ok(hits as f64 / answers.len() as f64)
}

/// Metrics of one final queue, with `decide` standing in for the selector.
///
/// The queue is ranked by selector score, highest first; the sort is stable
/// so ties keep queue insertion order.
pub fn score_queue(
    query: QueryId,
    queue: &[PaperId],
    answers: &BTreeSet<PaperId>,
    decide: impl Fn(PaperId) -> Decision,
    ks: &[usize],
) -> Result<QueryEval> {
    if answers.is_empty() {
        return Err(LabError::Contract(format!("query {} has no answers", query.0)));
    }
    let decisions: Vec<Decision> = queue.iter().map(|&p| decide(p)).collect();
    let found = queue.iter().filter(|p| answers.contains(p)).count();
    let selected: Vec<PaperId> = queue
        .iter()
        .zip(&decisions)
        .filter(|(_, d)| d.accept)
        .map(|(&p, _)| p)
        .collect();
    let selected_hits = selected.iter().filter(|p| answers.contains(p)).count();
    let mut order: Vec<usize> = (0..queue.len()).collect();
    order.sort_by(|&a, &b| decisions[b].score.total_cmp(&decisions[a].score));
    let ranked: Vec<PaperId> = order.into_iter().map(|i| queue[i]).collect();
    let mut at_k = BTreeMap::new();
    for &k in ks {
        at_k.insert(k, recall_at_k(&ranked, answers, k)?);
    }
    let n = answers.len() as f64;
    Ok(QueryEval {
        query,
        crawler_recall: found as f64 / n,
        precision: if selected.is_empty() {
            0.0
        } else {
            selected_hits as f64 / selected.len() as f64
        },
        recall: selected_hits as f64 / n,
        recall_at_k: at_k,
        queue_len: queue.len(),
        selected: selected.len(),
        actions: ActionCounts::default(),
        truncated: false,
    })
}

fn aggregate(per_query: Vec<QueryEval>) -> EvalResult {
    let n = per_query.len() as f64;
    let mean = |f: &dyn Fn(&QueryEval) -> f64| per_query.iter().map(f).sum::<f64>() / n;
    let mut at_k = BTreeMap::new();
    if let Some(first) = per_query.first() {
        for &k in first.recall_at_k.keys() {
            at_k.insert(k, mean(&|q| q.recall_at_k[&k]));
        }
    }
    let mut actions = ActionCounts::default();
    for q in &per_query {
        actions.add(&q.actions);
    }
    EvalResult {
        crawler_recall: mean(&|q| q.crawler_recall),
        precision: mean(&|q| q.precision),
        recall: mean(&|q| q.recall),
        recall_at_k: at_k,
        mean_actions: actions.crawler() as f64 / n,
        actions,
        per_query,
    }
}

/// Worker count from `PASA_LAB_THREADS`, defaulting to all cores.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub(crate) fn run_parallel<T: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| LabError::Contract(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Everything an evaluation reads.
#[derive(Clone, Copy)]
pub struct EvalSetup<'a> {
    pub policy: &'a dyn CrawlPolicy,
    pub selector: &'a SelectorModel,
    pub corpus: &'a Corpus,
    pub queries: &'a [Query],
    pub limits: &'a Limits,
    pub ks: &'a [usize],
}

/// Seed of run `run` on query `index`; run 0 of query 0 uses `seed` itself.
pub(crate) fn rollout_seed(seed: u64, run: usize, index: usize) -> u64 {
    derive_seed(derive_seed(seed, run as u64), index as u64)
}

/// Crawls every query once and scores the final queues.
///
/// Queries run in parallel, each with its own RNG stream derived from
/// `seed` and the query's position, so results do not depend on the
/// thread count.
pub fn evaluate(setup: &EvalSetup<'_>, seed: u64) -> Result<EvalResult> {
    ensemble_eval(setup, 1, seed)
}

/// Like [`evaluate`] but each query's queue is the union of `n_runs`
/// independent crawls. Run 0 uses exactly the streams [`evaluate`] uses.
pub fn ensemble_eval(setup: &EvalSetup<'_>, n_runs: usize, seed: u64) -> Result<EvalResult> {
    if setup.queries.is_empty() {
        return Err(LabError::Usage("evaluation needs at least one query".into()));
    }
    if n_runs == 0 {
        return Err(LabError::Usage("ensemble needs at least one run".into()));
    }
    setup.limits.validate()?;
    setup.selector.validate()?;
    let per_query = run_parallel(setup.queries.len(), |i| {
        let query = &setup.queries[i];
        let mut union: Vec<PaperId> = Vec::new();
        let mut seen = HashSet::new();
        let mut actions = ActionCounts::default();
        let mut truncated = false;
        for run in 0..n_runs {
            let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed(seed, run, i));
            let crawl = run_crawler(setup.policy, query, setup.corpus, setup.limits, &mut rng)?;
            actions.add(&ActionCounts::of(&crawl));
            truncated |= crawl.truncated;
            union.extend(crawl.queue.ids().filter(|&p| seen.insert(p)));
        }
        let mut q = score_queue(
            query.id,
            &union,
            &query.answers,
            |p| setup.selector.decide(query, p),
            setup.ks,
        )?;
        q.actions = actions;
        q.truncated = truncated;
        Ok(q)
    })?;
    Ok(aggregate(per_query))
}
