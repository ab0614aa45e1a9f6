use rand::seq::index;
use rand::RngCore;

use super::ppo::Sample;
use super::{advantages, assign_rewards, session_returns, PPOConfig, RewardConfig};
use crate::corpus::{Corpus, PaperId, Query};
use crate::env::{run_session, Env, Limits, Session, SessionState};
use crate::error::{LabError, Result};
use crate::policy::{value, Decoding, ParamPolicy, PolicySnapshot, ValueParams};
use crate::selector::SelectorModel;

/// Everything a training step reads but never mutates.
#[derive(Clone, Copy, Debug)]
pub struct SampleSetup<'a> {
    pub corpus: &'a Corpus,
    pub queries: &'a [Query],
    pub selector: &'a SelectorModel,
    pub reward: RewardConfig,
    pub ppo: PPOConfig,
    pub limits: Limits,
}

#[derive(Clone, Debug)]
pub struct TrainBatch {
    /// Indices into the setup's query list.
    pub queries: Vec<usize>,
    /// (query slot, session) in the order they were run.
    pub sessions: Vec<(usize, Session)>,
    pub samples: Vec<Sample>,
    /// A wave found fewer papers than requested and took all of them.
    pub short: bool,
}

impl TrainBatch {
    pub fn crawler_actions(&self) -> usize {
        self.sessions.iter().map(|(_, s)| s.crawler_actions()).sum()
    }

    /// Mean undiscounted reward per session.
    pub fn mean_session_reward(&self) -> f64 {
        let total: f64 = self
            .sessions
            .iter()
            .flat_map(|(_, s)| s.transitions.iter().map(|t| t.reward))
            .sum();
        total / self.sessions.len().max(1) as f64
    }
}

/// Uniformly picks up to `k` entries without replacement, keeping the
/// draw order. Returns the picks and whether fewer than `k` existed.
fn draw<T: Copy>(pool: &[T], k: usize, rng: &mut dyn RngCore) -> (Vec<T>, bool) {
    if pool.len() <= k {
        return (pool.to_vec(), pool.len() < k);
    }
    let picks = index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    (picks, false)
}

/// Samples one training batch.
///
/// A group of `queries_per_step` distinct queries each runs a query
/// session. One wave of paper sessions is then drawn uniformly from the
/// papers those searches queued, and a second wave from the papers the
/// first wave's expansions queued. Rewards, old log-probabilities, old
/// values, returns and advantages are all fixed here.
pub fn sample_step(
    setup: &SampleSetup<'_>,
    theta: &PolicySnapshot,
    phi: &ValueParams,
    sft: &PolicySnapshot,
    rng: &mut dyn RngCore,
) -> Result<TrainBatch> {
    let cfg = &setup.ppo;
    if setup.queries.len() < cfg.queries_per_step {
        return Err(LabError::Usage(format!(
            "{} queries available, {} needed per step",
            setup.queries.len(),
            cfg.queries_per_step
        )));
    }
    let chosen: Vec<usize> = index::sample(rng, setup.queries.len(), cfg.queries_per_step).into_vec();
    let policy = ParamPolicy::new(theta.clone(), Decoding::Sample);
    let mut envs: Vec<Env<'_>> = chosen
        .iter()
        .map(|&q| Env::new(setup.corpus, &setup.queries[q], setup.limits))
        .collect();

    let mut sessions: Vec<(usize, Session)> = Vec::new();
    let mut pool: Vec<(usize, PaperId, u32)> = Vec::new();
    for (slot, env) in envs.iter_mut().enumerate() {
        let s = run_session(env, SessionState::query(), &policy, rng)?;
        collect_spawned(slot, &s, &mut pool);
        sessions.push((slot, s));
    }
    let mut short = false;
    for _wave in 0..2 {
        let (picks, was_short) = draw(&pool, cfg.expand_sessions_per_wave, rng);
        short |= was_short;
        let mut next = Vec::new();
        for (slot, paper, depth) in picks {
            let s = run_session(&mut envs[slot], SessionState::paper(paper, depth), &policy, rng)?;
            collect_spawned(slot, &s, &mut next);
            sessions.push((slot, s));
        }
        pool = next;
    }

    for (slot, s) in sessions.iter_mut() {
        let env = &envs[*slot];
        assign_rewards(
            std::slice::from_mut(s),
            env.queue(),
            env.query(),
            setup.selector,
            &setup.reward,
        );
    }
    let mut samples = Vec::new();
    let value_fn = |s: &[f64]| value(phi, s);
    for (_, s) in &sessions {
        let returns = session_returns(s, &value_fn, theta, sft, cfg)?;
        let values_old: Vec<f64> = s
            .transitions
            .iter()
            .map(|t| value(phi, &t.features.state))
            .collect();
        let adv = advantages(&returns, &values_old)?;
        for (i, t) in s.transitions.iter().enumerate() {
            samples.push(Sample {
                features: t.features.clone(),
                action_index: t.action_index,
                logprob_old: t.logprob_old,
                value_old: values_old[i],
                ret: returns[i],
                advantage: adv[i],
            });
        }
    }
    Ok(TrainBatch {
        queries: chosen,
        sessions,
        samples,
        short,
    })
}

fn collect_spawned(slot: usize, session: &Session, out: &mut Vec<(usize, PaperId, u32)>) {
    for t in &session.transitions {
        out.extend(t.new_papers.iter().map(|&p| (slot, p, session.depth + 1)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_corpus, gen_queries, CorpusConfig};
    use crate::env::SessionKind;
    use crate::policy::{Architecture, PolicyParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world() -> (Corpus, Vec<Query>) {
        let c = gen_corpus(
            &CorpusConfig {
                n_papers: 500,
                ..Default::default()
            },
            9,
        )
        .unwrap();
        let q = gen_queries(&c, 8, 9).unwrap();
        (c, q)
    }

    fn searchy() -> PolicySnapshot {
        // strongly prefers Search and Expand over Stop
        let mut p = PolicyParams::zeros(Architecture::Linear);
        p.as_mut_slice()[0] = 3.0;
        p.as_mut_slice()[1] = 3.0;
        PolicySnapshot::new(p)
    }

    #[test]
    fn waves_have_requested_size_and_depths() {
        let (c, qs) = world();
        let sel = SelectorModel::exact();
        let setup = SampleSetup {
            corpus: &c,
            queries: &qs,
            selector: &sel,
            reward: RewardConfig::default(),
            ppo: PPOConfig::default(),
            limits: Limits::default(),
        };
        let theta = searchy();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_step(&setup, &theta, &ValueParams::zeros(), &theta, &mut rng).unwrap();
        let kinds: Vec<SessionKind> = b.sessions.iter().map(|(_, s)| s.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == SessionKind::Query).count(), 4);
        assert_eq!(b.sessions.len(), 16);
        assert!(!b.short);
        assert!(b.sessions[4..10].iter().all(|(_, s)| s.depth == 1));
        assert!(b.sessions[10..].iter().all(|(_, s)| s.depth == 2));
        assert_eq!(
            b.samples.len(),
            b.sessions.iter().map(|(_, s)| s.transitions.len()).sum::<usize>()
        );
        // zero value function, β irrelevant (θ == sft): advantage equals return
        assert!(b
            .samples
            .iter()
            .all(|s| s.advantage == s.ret && s.value_old == 0.0));
    }

    #[test]
    fn stop_only_policy_runs_search_sessions_only() {
        let (c, qs) = world();
        let sel = SelectorModel::exact();
        let setup = SampleSetup {
            corpus: &c,
            queries: &qs,
            selector: &sel,
            reward: RewardConfig::default(),
            ppo: PPOConfig::default(),
            limits: Limits::default(),
        };
        let mut p = PolicyParams::zeros(Architecture::Linear);
        p.as_mut_slice()[2] = 50.0;
        let theta = PolicySnapshot::new(p);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_step(&setup, &theta, &ValueParams::zeros(), &theta, &mut rng).unwrap();
        assert_eq!(b.sessions.len(), 4);
        assert!(b.short);
    }

    #[test]
    fn fixed_seed_reproduces_batch() {
        let (c, qs) = world();
        let sel = SelectorModel::exact();
        let setup = SampleSetup {
            corpus: &c,
            queries: &qs,
            selector: &sel,
            reward: RewardConfig::default(),
            ppo: PPOConfig::default(),
            limits: Limits::default(),
        };
        let theta = searchy();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let b = sample_step(&setup, &theta, &ValueParams::zeros(), &theta, &mut rng).unwrap();
            let shape: Vec<(usize, Option<PaperId>, Vec<String>)> = b
                .sessions
                .iter()
                .map(|(q, s)| {
                    (
                        *q,
                        s.paper,
                        s.transitions.iter().map(|t| t.action.to_string()).collect(),
                    )
                })
                .collect();
            (b.queries, shape)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn too_few_queries_is_usage_error() {
        let (c, qs) = world();
        let sel = SelectorModel::exact();
        let setup = SampleSetup {
            corpus: &c,
            queries: &qs[..2],
            selector: &sel,
            reward: RewardConfig::default(),
            ppo: PPOConfig::default(),
            limits: Limits::default(),
        };
        let theta = searchy();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = sample_step(&setup, &theta, &ValueParams::zeros(), &theta, &mut rng).unwrap_err();
        assert!(matches!(err, LabError::Usage(_)));
    }

    #[test]
    fn draw_is_without_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pool: Vec<u32> = (0..20).collect();
        for _ in 0..100 {
            let (mut picks, short) = draw(&pool, 6, &mut rng);
            assert!(!short);
            picks.sort_unstable();
            picks.dedup();
            assert_eq!(picks.len(), 6);
        }
        let (picks, short) = draw(&pool[..3], 6, &mut rng);
        assert_eq!(picks, vec![0, 1, 2]);
        assert!(short);
    }
}
