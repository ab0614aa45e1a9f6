//! Synthetic scholarly corpora and query sets with planted ground truth.

mod generate;
mod io;
mod validate;

pub use generate::{
    answer_set, gen_corpus, gen_queries, gen_queries_with, make_query, CorpusConfig, QueryConfig,
};
pub use io::{read_corpus, read_queries, write_corpus, write_queries, CORPUS_FORMAT, QUERIES_FORMAT};
pub use validate::{validate_corpus, validate_queries, Violation};

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Integer topic token.
pub type Keyword = u32;

/// Integer day index. Only the ordering of dates matters.
pub type Day = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PaperId(pub u32);

impl std::fmt::Display for PaperId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub u32);

/// A named part of a paper and the papers it cites, in citation order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub cited: Vec<PaperId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    pub id: PaperId,
    /// Sorted, duplicate-free.
    pub keywords: Vec<Keyword>,
    pub pub_date: Day,
    pub sections: Vec<Section>,
}

impl Paper {
    /// All cited ids across sections, deduplicated, in first-seen order.
    pub fn all_cited(&self) -> Vec<PaperId> {
        let mut seen = BTreeSet::new();
        self.sections
            .iter()
            .flat_map(|s| s.cited.iter().copied())
            .filter(|id| seen.insert(*id))
            .collect()
    }
}

/// One candidate search the crawler may issue for a query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub keywords: Vec<Keyword>,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: QueryId,
    pub keywords: Vec<Keyword>,
    pub query_date: Day,
    pub answers: BTreeSet<PaperId>,
    pub candidate_searches: Vec<SearchSpec>,
}

impl Query {
    pub fn is_answer(&self, id: PaperId) -> bool {
        self.answers.contains(&id)
    }

    /// Fraction of the query's keywords that `keywords` covers.
    pub fn coverage(&self, keywords: &[Keyword]) -> f64 {
        if self.keywords.is_empty() {
            return 0.0;
        }
        keyword_overlap(&self.keywords, keywords) as f64 / self.keywords.len() as f64
    }
}

/// An immutable, id-indexed collection of papers.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    papers: Vec<Paper>,
    index: HashMap<PaperId, usize>,
    seed: Option<u64>,
    config: Option<CorpusConfig>,
}

impl Corpus {
    /// Builds a corpus without checking invariants; use [`validate_corpus`]
    /// to inspect the result. Fails only on duplicate ids, which would make
    /// the index ambiguous.
    pub fn from_papers(papers: Vec<Paper>) -> Result<Self> {
        let mut index = HashMap::with_capacity(papers.len());
        for (i, p) in papers.iter().enumerate() {
            if index.insert(p.id, i).is_some() {
                return Err(LabError::Contract(format!("duplicate paper id {}", p.id)));
            }
        }
        Ok(Corpus {
            papers,
            index,
            seed: None,
            config: None,
        })
    }

    pub(crate) fn with_provenance(mut self, seed: u64, config: CorpusConfig) -> Self {
        self.seed = Some(seed);
        self.config = Some(config);
        self
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: PaperId) -> Option<&Paper> {
        self.index.get(&id).map(|&i| &self.papers[i])
    }

    pub fn paper(&self, id: PaperId) -> Result<&Paper> {
        self.get(id)
            .ok_or_else(|| LabError::Lookup(format!("unknown paper id {id}")))
    }

    pub fn contains(&self, id: PaperId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn config(&self) -> Option<&CorpusConfig> {
        self.config.as_ref()
    }

    pub fn citation_count(&self) -> usize {
        self.papers
            .iter()
            .flat_map(|p| &p.sections)
            .map(|s| s.cited.len())
            .sum()
    }
}

/// Size of the intersection of two sorted keyword lists.
pub fn keyword_overlap(a: &[Keyword], b: &[Keyword]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
