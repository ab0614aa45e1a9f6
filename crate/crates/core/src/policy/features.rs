//! Fixed-length numeric views of crawler states and actions.
//!
//! State features (`STATE_DIM`):
//!
//! | range   | meaning                                                    |
//! |---------|------------------------------------------------------------|
//! | 0..8    | query keyword histogram (keyword mod 8, normalized)        |
//! | 8       | 1 for query+paper sessions                                 |
//! | 9..17   | current-paper keyword histogram, zeros in query sessions   |
//! | 17      | fraction of query keywords the current paper covers        |
//! | 18      | depth / depth limit                                        |
//! | 19      | 1 at the depth limit                                       |
//! | 20      | actions taken / action budget                              |
//! | 21      | fraction of reachable papers not yet queued                |
//! | 22      | m / (1 + m), m = query coverage of reachable unqueued      |
//! |         | papers / search limit                                      |
//! | 23      | bias, always 1                                             |
//!
//! Action features (`ACTION_DIM`), one row per legal action:
//!
//! | range   | meaning                                                    |
//! |---------|------------------------------------------------------------|
//! | 0..3    | one-hot Search / Expand / Stop                             |
//! | 3       | target overlap with the query                              |
//! | 4       | novelty: fraction of results not yet queued                |
//! | 5       | query coverage of novel results / search limit             |
//! | 6       | 1 if already taken in this session                         |
//! | 7       | result count / search limit                                |
//! | 8..20   | per action type: state features 20, 17, 18, 22             |

use crate::corpus::PaperId;
use crate::env::{Action, ActionType, Env, SessionKind, SessionState};
use crate::error::{LabError, Result};

pub const HIST_BUCKETS: usize = 8;
pub const STATE_DIM: usize = 24;
pub const ACTION_DIM: usize = 20;

const S_KIND: usize = 8;
const S_PAPER_HIST: usize = 9;
const S_PAPER_COVERAGE: usize = 17;
const S_DEPTH: usize = 18;
const S_AT_LIMIT: usize = 19;
const S_ACTIONS: usize = 20;
const S_NOVEL_FRAC: usize = 21;
const S_NOVEL_MASS: usize = 22;
const S_BIAS: usize = 23;

const INTERACTIONS: [usize; 4] = [S_ACTIONS, S_PAPER_COVERAGE, S_DEPTH, S_NOVEL_MASS];

/// State features plus one feature row per legal action, aligned with the
/// legal-action list it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub state: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
}

impl FeatureVector {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn is_finite(&self) -> bool {
        self.state.iter().all(|x| x.is_finite()) && self.actions.iter().flatten().all(|x| x.is_finite())
    }
}

fn coverage_of(env: &Env<'_>, id: PaperId) -> f64 {
    env.corpus()
        .get(id)
        .map_or(0.0, |p| env.query().coverage(&p.keywords))
}

/// Papers a session could still reach: the union of search results for a
/// query session, or the current paper's citations when it may expand.
fn reachable(env: &Env<'_>, kind: SessionKind, paper: Option<PaperId>, depth: u32) -> Vec<PaperId> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    match kind {
        SessionKind::Query => {
            for i in 0..env.query().candidate_searches.len() {
                for &p in env.search_results(i) {
                    if seen.insert(p) {
                        out.push(p);
                    }
                }
            }
        }
        SessionKind::QueryPaper => {
            let limits = env.limits();
            if limits.expand_enabled && depth < limits.depth_limit {
                if let Some(p) = paper.and_then(|id| env.corpus().get(id)) {
                    out = p.all_cited();
                }
            }
        }
    }
    out
}

/// State features for a session of `kind` on `paper` at `depth` after
/// `actions_taken` actions, measured against the current queue.
pub fn state_features(
    env: &Env<'_>,
    kind: SessionKind,
    paper: Option<PaperId>,
    depth: u32,
    actions_taken: usize,
) -> Result<Vec<f64>> {
    let query = env.query();
    let limits = env.limits();
    let mut x = vec![0.0; STATE_DIM];

    let qn = query.keywords.len().max(1) as f64;
    for &k in &query.keywords {
        x[k as usize % HIST_BUCKETS] += 1.0 / qn;
    }
    if kind == SessionKind::QueryPaper {
        x[S_KIND] = 1.0;
        let id =
            paper.ok_or_else(|| LabError::Contract("query+paper state without a current paper".into()))?;
        let p = env.corpus().paper(id)?;
        let pn = p.keywords.len().max(1) as f64;
        for &k in &p.keywords {
            x[S_PAPER_HIST + k as usize % HIST_BUCKETS] += 1.0 / pn;
        }
        x[S_PAPER_COVERAGE] = query.coverage(&p.keywords);
    }
    x[S_DEPTH] = depth as f64 / limits.depth_limit as f64;
    x[S_AT_LIMIT] = if depth >= limits.depth_limit { 1.0 } else { 0.0 };
    x[S_ACTIONS] = actions_taken as f64 / limits.max_actions_per_session as f64;

    let reach = reachable(env, kind, paper, depth);
    let queue = env.queue();
    let novel: Vec<PaperId> = reach.iter().copied().filter(|p| !queue.contains(*p)).collect();
    if !reach.is_empty() {
        x[S_NOVEL_FRAC] = novel.len() as f64 / reach.len() as f64;
    }
    let mass = novel.iter().map(|&p| coverage_of(env, p)).sum::<f64>() / limits.search_limit as f64;
    x[S_NOVEL_MASS] = mass / (1.0 + mass);
    x[S_BIAS] = 1.0;
    Ok(x)
}

/// Featurizes a decision point. Rows of `actions` follow `legal` order.
pub fn featurize(env: &Env<'_>, state: &SessionState, legal: &[Action]) -> Result<FeatureVector> {
    if legal.is_empty() {
        return Err(LabError::Contract(
            "featurize needs at least one legal action".into(),
        ));
    }
    let s = state_features(
        env,
        state.kind,
        state.current_paper,
        state.depth,
        state.actions.len(),
    )?;
    let limit = env.limits().search_limit as f64;
    let queue = env.queue();
    let mut rows = Vec::with_capacity(legal.len());
    for &a in legal {
        let mut row = vec![0.0; ACTION_DIM];
        let kind = a.kind();
        let type_slot = match kind {
            ActionType::Search => 0,
            ActionType::Expand => 1,
            ActionType::Stop => 2,
        };
        row[type_slot] = 1.0;
        if kind != ActionType::Stop {
            let results = env.predicted_results(state, a)?;
            let novel: Vec<PaperId> = results.iter().copied().filter(|p| !queue.contains(*p)).collect();
            row[3] = match a {
                Action::Search(i) => env.query().coverage(&env.query().candidate_searches[i].keywords),
                _ if results.is_empty() => 0.0,
                _ => results.iter().map(|&p| coverage_of(env, p)).sum::<f64>() / results.len() as f64,
            };
            if !results.is_empty() {
                row[4] = novel.len() as f64 / results.len() as f64;
            }
            row[5] = novel.iter().map(|&p| coverage_of(env, p)).sum::<f64>() / limit;
            row[6] = if state.actions.contains(&a) { 1.0 } else { 0.0 };
            row[7] = results.len() as f64 / limit;
        }
        let base = 8 + type_slot * INTERACTIONS.len();
        for (k, &si) in INTERACTIONS.iter().enumerate() {
            row[base + k] = s[si];
        }
        rows.push(row);
    }
    Ok(FeatureVector {
        state: s,
        actions: rows,
    })
}
