use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Paper, Query};
use crate::env::{legal_actions, Action, Env, Limits, SessionState};
use crate::error::{LabError, Result};
use crate::policy::{featurize, log_prob, logprob_and_grad, FeatureVector, PolicyParams, PolicySnapshot};

/// Chance that a section citing no answer still appears in a demo.
const OTHER_SECTION_RATE: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Paper sessions demonstrated per query, taken from the queue in FIFO
    /// order after the search session.
    pub expand_sessions_per_query: usize,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            epochs: 50,
            learning_rate: 0.5,
            expand_sessions_per_query: 6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Demo {
    pub features: FeatureVector,
    pub legal: Vec<Action>,
    pub action_index: usize,
}

impl Demo {
    pub fn action(&self) -> Action {
        self.legal[self.action_index]
    }
}

#[derive(Clone, Debug, Default)]
pub struct DemoSet {
    pub demos: Vec<Demo>,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }
}

/// Sections an expand demonstration takes: every section citing an answer,
/// plus each other section with a small fixed probability.
pub fn pick_sections(paper: &Paper, query: &Query, rng: &mut impl Rng) -> Vec<usize> {
    paper
        .sections
        .iter()
        .enumerate()
        .filter(|(_, s)| s.cited.iter().any(|&p| query.is_answer(p)) || rng.gen_bool(OTHER_SECTION_RATE))
        .map(|(i, _)| i)
        .collect()
}

/// Plays `plan` (truncated to the action budget) then Stop, recording one
/// demo per decision.
fn demonstrate(
    env: &mut Env<'_>,
    mut state: SessionState,
    plan: &[Action],
    out: &mut Vec<Demo>,
) -> Result<()> {
    let mut plan = plan.iter().copied();
    loop {
        let legal = legal_actions(env, &state);
        let next = plan.next().filter(|a| legal.contains(a)).unwrap_or(Action::Stop);
        let action_index = legal.iter().position(|&a| a == next).expect("filtered to legal");
        out.push(Demo {
            features: featurize(env, &state, &legal)?,
            legal,
            action_index,
        });
        if env.step(&mut state, next)?.done {
            return Ok(());
        }
    }
}

/// Oracle demonstrations shaped like the crawler's own sessions.
///
/// The query session issues, in order, every candidate search whose
/// results contain an answer, then stops. The first papers of the resulting
/// queue each get a paper session expanding the sections [`pick_sections`]
/// chooses, then stop.
pub fn make_demos(
    corpus: &Corpus,
    queries: &[Query],
    limits: &Limits,
    cfg: &BcConfig,
    seed: u64,
) -> Result<DemoSet> {
    limits.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut demos = Vec::new();
    for query in queries {
        let mut env = Env::new(corpus, query, *limits);
        let searches: Vec<Action> = (0..query.candidate_searches.len())
            .filter(|&i| env.search_results(i).iter().any(|&p| query.is_answer(p)))
            .map(Action::Search)
            .collect();
        demonstrate(&mut env, SessionState::query(), &searches, &mut demos)?;
        for _ in 0..cfg.expand_sessions_per_query {
            let Some(entry) = env.queue_mut().next_unprocessed() else {
                break;
            };
            let paper = corpus.paper(entry.id)?;
            let plan: Vec<Action> = pick_sections(paper, query, &mut rng)
                .into_iter()
                .map(Action::Expand)
                .collect();
            demonstrate(
                &mut env,
                SessionState::paper(entry.id, entry.depth),
                &plan,
                &mut demos,
            )?;
        }
    }
    Ok(DemoSet { demos })
}

/// Mean negative log-likelihood of the demonstrated actions.
pub fn demo_nll(params: &PolicyParams, demos: &DemoSet) -> Result<f64> {
    if demos.is_empty() {
        return Err(LabError::Contract("empty demo set".into()));
    }
    let mut total = 0.0;
    for d in &demos.demos {
        total -= log_prob(params, &d.features, d.action_index)?;
    }
    Ok(total / demos.len() as f64)
}

#[derive(Clone, Debug)]
pub struct BcOutcome {
    pub policy: PolicySnapshot,
    /// NLL before training, then after each epoch.
    pub nll: Vec<f64>,
}

/// Full-batch gradient descent on the demo NLL.
pub fn bc_train(demos: &DemoSet, init: PolicyParams, cfg: &BcConfig) -> Result<BcOutcome> {
    if demos.is_empty() {
        return Err(LabError::Contract(
            "behavior cloning needs at least one demo".into(),
        ));
    }
    let n = demos.len() as f64;
    let mut params = init;
    let mut nll = vec![demo_nll(&params, demos)?];
    for epoch in 0..cfg.epochs {
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for d in &demos.demos {
            let (lp, g) = logprob_and_grad(&params, &d.features, d.action_index)?;
            loss -= lp;
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc -= gi / n;
            }
        }
        if !loss.is_finite() {
            return Err(LabError::Numeric(format!(
                "behavior cloning loss diverged in epoch {epoch}"
            )));
        }
        super::sgd_step(params.as_mut_slice(), &grad, cfg.learning_rate);
        nll.push(demo_nll(&params, demos)?);
    }
    Ok(BcOutcome {
        policy: PolicySnapshot::new(params),
        nll,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_corpus, gen_queries, CorpusConfig, PaperId, QueryId, Section};
    use crate::policy::{action_dist, Architecture};
    use std::collections::BTreeSet;

    fn setup() -> (Corpus, Vec<Query>) {
        let c = gen_corpus(
            &CorpusConfig {
                n_papers: 400,
                ..Default::default()
            },
            5,
        )
        .unwrap();
        let q = gen_queries(&c, 6, 6).unwrap();
        (c, q)
    }

    fn mixed_paper() -> (Paper, Query) {
        let paper = Paper {
            id: PaperId(10),
            keywords: vec![1],
            pub_date: 10,
            sections: vec![
                Section {
                    name: "A".into(),
                    cited: vec![PaperId(1), PaperId(2)],
                },
                Section {
                    name: "B".into(),
                    cited: vec![PaperId(3)],
                },
            ],
        };
        let query = Query {
            id: QueryId(0),
            keywords: vec![1],
            query_date: 20,
            answers: BTreeSet::from([PaperId(2)]),
            candidate_searches: Vec::new(),
        };
        (paper, query)
    }

    #[test]
    fn answer_sections_always_chosen() {
        let (paper, query) = mixed_paper();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(pick_sections(&paper, &query, &mut rng).contains(&0));
        }
    }

    #[test]
    fn other_sections_chosen_at_ten_percent() {
        let (paper, query) = mixed_paper();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| pick_sections(&paper, &query, &mut rng).contains(&1))
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.10).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn demos_are_legal_and_sessions_end_in_stop() {
        let (c, qs) = setup();
        let demos = make_demos(&c, &qs, &Limits::default(), &BcConfig::default(), 3).unwrap();
        assert!(!demos.is_empty());
        for d in &demos.demos {
            assert!(d.action_index < d.features.num_actions());
            assert_eq!(d.legal.len(), d.features.num_actions());
        }
        // every session ends in stop: count stops == sessions started
        let stops = demos.demos.iter().filter(|d| d.action().is_stop()).count();
        let starts = demos.demos.iter().filter(|d| d.features.state[20] == 0.0).count();
        assert_eq!(stops, starts);
        assert!(demos
            .demos
            .iter()
            .any(|d| matches!(d.action(), Action::Expand(_))));
    }

    #[test]
    fn no_answer_hits_gives_stop_only() {
        let (c, qs) = setup();
        let mut q = qs[0].clone();
        // answers the searches can never return: papers after the query date
        q.answers = BTreeSet::from([PaperId(c.len() as u32 - 1)]);
        q.query_date = 1;
        let demos = make_demos(&c, &[q], &Limits::default(), &BcConfig::default(), 3).unwrap();
        assert_eq!(demos.len(), 1);
        assert_eq!(demos.demos[0].action(), Action::Stop);
    }

    #[test]
    fn matching_policy_has_zero_nll() {
        let demo = Demo {
            features: FeatureVector {
                state: Vec::new(),
                actions: vec![vec![1.0], vec![0.0]],
            },
            legal: vec![Action::Search(0), Action::Stop],
            action_index: 0,
        };
        let set = DemoSet { demos: vec![demo] };
        let p = PolicyParams::from_flat(Architecture::Linear, 1, vec![60.0, 0.0]).unwrap();
        let out = bc_train(
            &set,
            p,
            &BcConfig {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(out.nll[0] < 1e-6);
        assert_eq!(out.nll.len(), 1);
    }

    #[test]
    fn training_beats_uniform_and_nll_never_rises() {
        let (c, qs) = setup();
        let demos = make_demos(&c, &qs, &Limits::default(), &BcConfig::default(), 3).unwrap();
        let cfg = BcConfig {
            epochs: 30,
            learning_rate: 0.1,
            ..Default::default()
        };
        let out = bc_train(&demos, PolicyParams::zeros(Architecture::Linear), &cfg).unwrap();
        for w in out.nll.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
        let mut p_mean = 0.0;
        let mut uniform = 0.0;
        for d in &demos.demos {
            p_mean += action_dist(&out.policy, &d.features).unwrap()[d.action_index];
            uniform += 1.0 / d.features.num_actions() as f64;
        }
        assert!(p_mean > uniform, "{p_mean} vs {uniform}");
    }

    #[test]
    fn empty_demos_rejected() {
        let err = bc_train(
            &DemoSet::default(),
            PolicyParams::zeros(Architecture::Linear),
            &BcConfig::default(),
        );
        assert!(matches!(err, Err(LabError::Contract(_))));
    }
}
