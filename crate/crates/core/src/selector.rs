//! The Selector: a relevance oracle over (query, paper) pairs that also
//! serves as the auxiliary reward model inside the crawler reward.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PaperId, Query};
use crate::derive_seed;
use crate::env::QueueView;
use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorMode {
    #[default]
    Exact,
    Noisy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorModel {
    pub mode: SelectorMode,
    pub false_positive_rate: f64,
    pub false_negative_rate: f64,
    pub seed: u64,
}

impl Default for SelectorModel {
    fn default() -> Self {
        Self::exact()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub accept: bool,
    /// Confidence used as a ranking key, in [0, 1].
    pub score: f64,
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

impl SelectorModel {
    pub fn exact() -> Self {
        SelectorModel {
            mode: SelectorMode::Exact,
            false_positive_rate: 0.0,
            false_negative_rate: 0.0,
            seed: 0,
        }
    }

    pub fn noisy(false_positive_rate: f64, false_negative_rate: f64, seed: u64) -> Result<Self> {
        let m = SelectorModel {
            mode: SelectorMode::Noisy,
            false_positive_rate,
            false_negative_rate,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, r) in [
            ("false_positive_rate", self.false_positive_rate),
            ("false_negative_rate", self.false_negative_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(LabError::config(field, "must lie in [0, 1]"));
            }
            if self.mode == SelectorMode::Exact && r != 0.0 {
                return Err(LabError::config(field, "must be 0 for the exact selector"));
            }
        }
        Ok(())
    }

    /// The decision without an existence check. Noisy decisions are a pure
    /// function of (seed, query, paper), so repeated encounters agree.
    pub fn decide(&self, query: &Query, paper: PaperId) -> Decision {
        let truth = query.is_answer(paper);
        match self.mode {
            SelectorMode::Exact => Decision {
                accept: truth,
                score: if truth { 1.0 } else { 0.0 },
            },
            SelectorMode::Noisy => {
                let base = derive_seed(
                    derive_seed(self.seed ^ 0x5E1E_C70F, query.id.0 as u64 + 1),
                    paper.0 as u64 + 1,
                );
                let flip_draw = unit(derive_seed(base, 1));
                let score_draw = unit(derive_seed(base, 2));
                let rate = if truth {
                    self.false_negative_rate
                } else {
                    self.false_positive_rate
                };
                let accept = truth != (flip_draw < rate);
                let score = if accept {
                    0.5 + 0.5 * score_draw
                } else {
                    0.5 * score_draw
                };
                Decision { accept, score }
            }
        }
    }
}

/// Judges whether `paper` satisfies `query`.
pub fn select(model: &SelectorModel, corpus: &Corpus, query: &Query, paper: PaperId) -> Result<Decision> {
    corpus.paper(paper)?;
    Ok(model.decide(query, paper))
}

/// Reward indicator: 1 iff (the selector accepts `paper` or it is a known
/// answer) and it was not in the queue before the current action.
pub fn indicator(model: &SelectorModel, query: &Query, paper: PaperId, queue_before: QueueView<'_>) -> u8 {
    let matches = model.decide(query, paper).accept || query.is_answer(paper);
    u8::from(matches && !queue_before.contains(paper))
}

/// The indicator restricted to the answer set: 1 iff `paper` is a known
/// answer not yet queued.
pub fn answer_indicator(query: &Query, paper: PaperId, queue_before: QueueView<'_>) -> u8 {
    u8::from(query.is_answer(paper) && !queue_before.contains(paper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Paper, QueryId};
    use crate::env::PaperQueue;
    use proptest::prelude::*;

    fn query() -> Query {
        Query {
            id: QueryId(3),
            keywords: vec![1],
            query_date: 100,
            answers: [1, 2].into_iter().map(PaperId).collect(),
            candidate_searches: vec![],
        }
    }

    fn corpus() -> Corpus {
        Corpus::from_papers(
            (0..5)
                .map(|i| Paper {
                    id: PaperId(i),
                    keywords: vec![1],
                    pub_date: i,
                    sections: vec![],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_mode_decisions() {
        let (q, c) = (query(), corpus());
        let m = SelectorModel::exact();
        assert_eq!(
            select(&m, &c, &q, PaperId(1)).unwrap(),
            Decision {
                accept: true,
                score: 1.0
            }
        );
        assert_eq!(
            select(&m, &c, &q, PaperId(0)).unwrap(),
            Decision {
                accept: false,
                score: 0.0
            }
        );
        assert!(matches!(
            select(&m, &c, &q, PaperId(42)),
            Err(LabError::Lookup(_))
        ));
    }

    #[test]
    fn exact_mode_rejects_rates() {
        let m = SelectorModel {
            false_positive_rate: 0.1,
            ..SelectorModel::exact()
        };
        assert!(m.validate().is_err());
        assert!(SelectorModel::noisy(1.5, 0.0, 0).is_err());
    }

    #[test]
    fn false_positive_rate_monte_carlo() {
        let m = SelectorModel::noisy(0.05, 0.0, 9).unwrap();
        let q = Query {
            answers: Default::default(),
            ..query()
        };
        let n = 10_000;
        let accepted = (0..n).filter(|&i| m.decide(&q, PaperId(i)).accept).count();
        let rate = accepted as f64 / n as f64;
        assert!((rate - 0.05).abs() <= 0.01, "{rate}");
    }

    #[test]
    fn indicator_branches() {
        let q = query();
        let mut queue = PaperQueue::new();
        // selector accepts, not queued
        assert_eq!(
            indicator(&SelectorModel::exact(), &q, PaperId(1), queue.view()),
            1
        );
        // answer rejected by a noisy selector still counts
        let always_reject = SelectorModel::noisy(0.0, 1.0, 0).unwrap();
        assert!(!always_reject.decide(&q, PaperId(2)).accept);
        assert_eq!(indicator(&always_reject, &q, PaperId(2), queue.view()), 1);
        // accepted but already queued
        queue.push(PaperId(1), 1);
        assert_eq!(
            indicator(&SelectorModel::exact(), &q, PaperId(1), queue.view()),
            0
        );
        // a false positive earns credit only through the selector branch
        let always_accept = SelectorModel::noisy(1.0, 0.0, 0).unwrap();
        assert_eq!(indicator(&always_accept, &q, PaperId(4), queue.view()), 1);
        assert_eq!(answer_indicator(&q, PaperId(4), queue.view()), 0);
    }

    proptest! {
        #[test]
        fn exact_indicator_is_answer_and_unqueued(paper in 0u32..6, queued in proptest::collection::vec(0u32..6, 0..6)) {
            let q = query();
            let mut queue = PaperQueue::new();
            for id in &queued {
                queue.push(PaperId(*id), 1);
            }
            let id = PaperId(paper);
            let expected = u8::from(q.is_answer(id) && !queue.contains(id));
            prop_assert_eq!(indicator(&SelectorModel::exact(), &q, id, queue.view()), expected);
            prop_assert_eq!(answer_indicator(&q, id, queue.view()), expected);
        }

        #[test]
        fn queueing_only_turns_ones_into_zeros(seed in any::<u64>(), paper in 0u32..50) {
            let q = query();
            let m = SelectorModel::noisy(0.3, 0.3, seed).unwrap();
            let mut queue = PaperQueue::new();
            let before = indicator(&m, &q, PaperId(paper), queue.view());
            queue.push(PaperId(paper), 1);
            let after = indicator(&m, &q, PaperId(paper), queue.view());
            prop_assert!(after <= before);
            prop_assert_eq!(after, 0);
        }

        #[test]
        fn noisy_decisions_reproducible(seed in any::<u64>(), paper in any::<u32>()) {
            let q = query();
            let m = SelectorModel::noisy(0.2, 0.1, seed).unwrap();
            prop_assert_eq!(m.decide(&q, PaperId(paper)), m.decide(&q, PaperId(paper)));
        }
    }
}
