//! The crawler MDP: actions, sessions, the paper queue and full crawls.

mod crawl;
mod queue;
mod tools;
mod trace;

pub use crawl::{
    legal_actions, run_crawler, run_session, CrawlPolicy, CrawlResult, DecisionContext, Env, StepOutcome,
};
pub use queue::{PaperQueue, QueueEntry, QueueView};
pub use tools::{expand, search};
pub use trace::{read_trace, write_trace, TraceRecord};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::PaperId;
use crate::error::{LabError, Result};
use crate::policy::FeatureVector;

/// One logical crawler decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    /// Issue the query's candidate search with this index.
    Search(usize),
    /// Queue every paper cited by this section of the current paper.
    Expand(usize),
    /// End the session.
    Stop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActionType {
    Search,
    Expand,
    Stop,
}

impl Action {
    pub fn kind(self) -> ActionType {
        match self {
            Action::Search(_) => ActionType::Search,
            Action::Expand(_) => ActionType::Expand,
            Action::Stop => ActionType::Stop,
        }
    }

    pub fn is_stop(self) -> bool {
        self == Action::Stop
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Search(i) => write!(f, "search:{i}"),
            Action::Expand(i) => write!(f, "expand:{i}"),
            Action::Stop => write!(f, "stop"),
        }
    }
}

impl FromStr for Action {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::Contract(format!("unparseable action {s:?}"));
        match s.split_once(':') {
            None if s == "stop" => Ok(Action::Stop),
            Some(("search", i)) => Ok(Action::Search(i.parse().map_err(|_| bad())?)),
            Some(("expand", i)) => Ok(Action::Expand(i.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Session initial-state type: the bare query, or the query plus a paper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionKind {
    #[serde(rename = "query")]
    Query,
    #[serde(rename = "query+paper")]
    QueryPaper,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    /// Papers at this depth get a session but may not expand.
    pub depth_limit: u32,
    pub max_sessions: usize,
    /// Including the final `Stop`; at the cap only `Stop` is legal.
    pub max_actions_per_session: usize,
    pub search_limit: usize,
    /// `false` masks every `Expand` action.
    pub expand_enabled: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            depth_limit: 3,
            max_sessions: 200,
            max_actions_per_session: 8,
            search_limit: 10,
            expand_enabled: true,
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("depth_limit", self.depth_limit as usize),
            ("max_sessions", self.max_sessions),
            ("max_actions_per_session", self.max_actions_per_session),
            ("search_limit", self.search_limit),
        ] {
            if v == 0 {
                return Err(LabError::config(field, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Per-session part of the agent state; the queue lives in [`Env`].
#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    pub kind: SessionKind,
    pub current_paper: Option<PaperId>,
    pub depth: u32,
    pub actions: Vec<Action>,
}

impl SessionState {
    pub fn query() -> Self {
        SessionState {
            kind: SessionKind::Query,
            current_paper: None,
            depth: 0,
            actions: Vec::new(),
        }
    }

    pub fn paper(id: PaperId, depth: u32) -> Self {
        SessionState {
            kind: SessionKind::QueryPaper,
            current_paper: Some(id),
            depth,
            actions: Vec::new(),
        }
    }
}

/// One sampled step, with everything needed to replay it for training.
#[derive(Clone, Debug)]
pub struct Transition {
    pub kind: SessionKind,
    pub depth: u32,
    pub features: FeatureVector,
    pub legal: Vec<Action>,
    pub action_index: usize,
    pub action: Action,
    /// Papers actually appended, after deduplication against the queue.
    pub new_papers: Vec<PaperId>,
    /// Queue length before this action, so the prior membership can be
    /// recovered with [`PaperQueue::view_before`].
    pub queue_len_before: usize,
    /// State features of the sessions each new paper will open.
    pub spawned: Vec<Vec<f64>>,
    /// Filled by the trainer.
    pub reward: f64,
    /// Log-probability of `action` under the sampling policy.
    pub logprob_old: f64,
}

/// A sub-trajectory that ends with `Stop`.
#[derive(Clone, Debug)]
pub struct Session {
    pub kind: SessionKind,
    pub paper: Option<PaperId>,
    pub depth: u32,
    pub transitions: Vec<Transition>,
    pub terminal: bool,
}

impl Session {
    pub fn is_well_formed(&self) -> bool {
        let n = self.transitions.len();
        n > 0
            && self.transitions[n - 1].action.is_stop()
            && self.transitions[..n - 1].iter().all(|t| !t.action.is_stop())
    }

    /// Search and Expand actions in this session.
    pub fn crawler_actions(&self) -> usize {
        self.transitions.iter().filter(|t| !t.action.is_stop()).count()
    }
}
