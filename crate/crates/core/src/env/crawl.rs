use rand::RngCore;

use super::{search, Action, Limits, PaperQueue, Session, SessionKind, SessionState, Transition};
use crate::corpus::{Corpus, PaperId, Query};
use crate::error::{LabError, Result};
use crate::policy::{featurize, state_features, FeatureVector};

/// The world of one query's crawl: shared corpus, the query, and the
/// growing paper queue.
#[derive(Clone, Debug)]
pub struct Env<'a> {
    corpus: &'a Corpus,
    query: &'a Query,
    limits: Limits,
    queue: PaperQueue,
    search_results: Vec<Vec<PaperId>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub new_papers: Vec<PaperId>,
    pub done: bool,
}

impl<'a> Env<'a> {
    pub fn new(corpus: &'a Corpus, query: &'a Query, limits: Limits) -> Self {
        // search results depend only on (spec, date): compute once per crawl
        let search_results = query
            .candidate_searches
            .iter()
            .map(|s| search(corpus, s, query.query_date, limits.search_limit))
            .collect();
        Env {
            corpus,
            query,
            limits,
            queue: PaperQueue::new(),
            search_results,
        }
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn query(&self) -> &'a Query {
        self.query
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn queue(&self) -> &PaperQueue {
        &self.queue
    }

    pub fn queue_mut(&mut self) -> &mut PaperQueue {
        &mut self.queue
    }

    pub fn into_queue(self) -> PaperQueue {
        self.queue
    }

    pub fn search_results(&self, spec: usize) -> &[PaperId] {
        &self.search_results[spec]
    }

    /// The papers an action would try to append, before deduplication.
    pub fn predicted_results(&self, state: &SessionState, action: Action) -> Result<Vec<PaperId>> {
        match action {
            Action::Search(i) => self
                .search_results
                .get(i)
                .cloned()
                .ok_or_else(|| LabError::Lookup(format!("no candidate search {i}"))),
            Action::Expand(j) => {
                let paper = state
                    .current_paper
                    .ok_or_else(|| LabError::Contract("expand requested without a current paper".into()))?;
                super::expand(self.corpus, paper, j)
            }
            Action::Stop => Ok(Vec::new()),
        }
    }

    /// Applies `action`, appending deduplicated results tagged with
    /// `state.depth + 1`.
    pub fn step(&mut self, state: &mut SessionState, action: Action) -> Result<StepOutcome> {
        if !legal_actions(self, state).contains(&action) {
            return Err(LabError::Contract(format!(
                "action {action} is not legal in this state"
            )));
        }
        state.actions.push(action);
        if action.is_stop() {
            return Ok(StepOutcome {
                new_papers: Vec::new(),
                done: true,
            });
        }
        let found = self.predicted_results(state, action)?;
        let depth = state.depth + 1;
        let new_papers = found
            .into_iter()
            .filter(|&id| self.queue.push(id, depth))
            .collect();
        Ok(StepOutcome {
            new_papers,
            done: false,
        })
    }
}

/// Legal actions, with `Stop` always last.
///
/// Query sessions may run any candidate search. Paper sessions may expand
/// any section unless the paper sits at the depth limit or Expand is masked.
/// Once a session has used all but one of its action budget only `Stop`
/// remains.
pub fn legal_actions(env: &Env<'_>, state: &SessionState) -> Vec<Action> {
    let mut out = Vec::new();
    let budget_left = state.actions.len() + 1 < env.limits.max_actions_per_session;
    if budget_left {
        match state.kind {
            SessionKind::Query => {
                out.extend((0..env.query.candidate_searches.len()).map(Action::Search));
            }
            SessionKind::QueryPaper => {
                let can_expand = env.limits.expand_enabled && state.depth < env.limits.depth_limit;
                if let (true, Some(p)) = (can_expand, state.current_paper) {
                    let n = env.corpus.get(p).map_or(0, |p| p.sections.len());
                    out.extend((0..n).map(Action::Expand));
                }
            }
        }
    }
    out.push(Action::Stop);
    out
}

/// What a policy sees when asked for a decision.
pub struct DecisionContext<'c, 'a> {
    pub env: &'c Env<'a>,
    pub state: &'c SessionState,
    pub legal: &'c [Action],
    pub features: &'c FeatureVector,
}

/// Anything that can drive the crawler.
pub trait CrawlPolicy: Sync {
    /// Returns an index into `ctx.legal` and the log-probability with which
    /// it was chosen.
    fn choose(&self, ctx: &DecisionContext<'_, '_>, rng: &mut dyn RngCore) -> Result<(usize, f64)>;
}

/// Runs one session from `state` until `Stop`.
pub fn run_session(
    env: &mut Env<'_>,
    mut state: SessionState,
    policy: &dyn CrawlPolicy,
    rng: &mut dyn RngCore,
) -> Result<Session> {
    let mut session = Session {
        kind: state.kind,
        paper: state.current_paper,
        depth: state.depth,
        transitions: Vec::new(),
        terminal: false,
    };
    loop {
        let legal = legal_actions(env, &state);
        let features = featurize(env, &state, &legal)?;
        let (index, logprob) = policy.choose(
            &DecisionContext {
                env,
                state: &state,
                legal: &legal,
                features: &features,
            },
            rng,
        )?;
        let action = *legal
            .get(index)
            .ok_or_else(|| LabError::Contract(format!("policy chose index {index} of {}", legal.len())))?;
        let queue_len_before = env.queue().len();
        let kind = state.kind;
        let depth = state.depth;
        let outcome = env.step(&mut state, action)?;
        let spawned = outcome
            .new_papers
            .iter()
            .map(|&p| state_features(env, SessionKind::QueryPaper, Some(p), depth + 1, 0))
            .collect::<Result<Vec<_>>>()?;
        session.transitions.push(Transition {
            kind,
            depth,
            features,
            legal,
            action_index: index,
            action,
            new_papers: outcome.new_papers,
            queue_len_before,
            spawned,
            reward: 0.0,
            logprob_old: logprob,
        });
        if outcome.done {
            session.terminal = true;
            return Ok(session);
        }
    }
}

#[derive(Clone, Debug)]
pub struct CrawlResult {
    pub queue: PaperQueue,
    pub sessions: Vec<Session>,
    /// The session cap stopped the crawl with unprocessed papers left.
    pub truncated: bool,
}

impl CrawlResult {
    pub fn crawler_actions(&self) -> usize {
        self.sessions.iter().map(Session::crawler_actions).sum()
    }
}

/// Full crawl: one query session, then one paper session per queued paper
/// in FIFO order until the queue is exhausted or `max_sessions` is reached.
pub fn run_crawler(
    policy: &dyn CrawlPolicy,
    query: &Query,
    corpus: &Corpus,
    limits: &Limits,
    rng: &mut dyn RngCore,
) -> Result<CrawlResult> {
    limits.validate()?;
    let mut env = Env::new(corpus, query, *limits);
    let mut sessions = vec![run_session(&mut env, SessionState::query(), policy, rng)?];
    let mut truncated = false;
    loop {
        if env.queue().cursor() >= env.queue().len() {
            break;
        }
        if sessions.len() >= limits.max_sessions {
            truncated = true;
            break;
        }
        let entry = env.queue_mut().next_unprocessed().expect("cursor checked");
        let state = SessionState::paper(entry.id, entry.depth);
        sessions.push(run_session(&mut env, state, policy, rng)?);
    }
    Ok(CrawlResult {
        queue: env.into_queue(),
        sessions,
        truncated,
    })
}
