use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Day, Keyword, Paper, PaperId, Query, QueryId, SearchSpec, Section};
use crate::error::{LabError, Result};

const SECTION_NAMES: &[&str] = &[
    "Introduction",
    "Related Work",
    "Background",
    "Method",
    "Experiments",
    "Analysis",
    "Discussion",
    "Applications",
    "Limitations",
    "Conclusion",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub n_papers: usize,
    pub n_topics: usize,
    /// Vocabulary size of each latent topic. Keyword `k` belongs to topic
    /// `k / keywords_per_topic`.
    pub keywords_per_topic: usize,
    pub min_keywords: usize,
    pub max_keywords: usize,
    /// Each paper draws 1..=max_topics_per_paper latent topics.
    pub max_topics_per_paper: usize,
    pub max_sections: usize,
    pub max_cited_per_section: usize,
    /// Probability that a citation is drawn from the section's focus topic
    /// (weighted by keyword similarity) rather than uniformly from the past.
    pub same_topic_citation: f64,
    /// Exponent on (1 + shared keywords) when weighting same-topic
    /// citation candidates.
    pub citation_affinity: f64,
    pub max_date_gap: u32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_papers: 2000,
            n_topics: 10,
            keywords_per_topic: 12,
            min_keywords: 3,
            max_keywords: 6,
            max_topics_per_paper: 3,
            max_sections: 6,
            max_cited_per_section: 6,
            same_topic_citation: 0.8,
            citation_affinity: 2.0,
            max_date_gap: 3,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_papers", self.n_papers),
            ("n_topics", self.n_topics),
            ("keywords_per_topic", self.keywords_per_topic),
            ("min_keywords", self.min_keywords),
            ("max_topics_per_paper", self.max_topics_per_paper),
            ("max_sections", self.max_sections),
            ("max_date_gap", self.max_date_gap as usize),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(LabError::config(field, "must be at least 1"));
            }
        }
        if self.max_keywords < self.min_keywords {
            return Err(LabError::config("max_keywords", "must be >= min_keywords"));
        }
        if self.citation_affinity.is_nan() || self.citation_affinity < 0.0 {
            return Err(LabError::config("citation_affinity", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.same_topic_citation) {
            return Err(LabError::config("same_topic_citation", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn topic_of(&self, k: Keyword) -> usize {
        k as usize / self.keywords_per_topic
    }

    fn topic_keywords(&self, topic: usize) -> std::ops::Range<Keyword> {
        let lo = (topic * self.keywords_per_topic) as Keyword;
        lo..lo + self.keywords_per_topic as Keyword
    }
}

/// Generates a corpus whose citations all point strictly backwards in time.
///
/// Papers are created in date order; each draws one to three latent topics
/// and its keywords from those topics' vocabularies. Every section has a
/// focus topic and cites earlier papers of that topic, weighted by keyword
/// similarity to the citing paper, so relevant papers tend to cite each
/// other.
///
/// Papers are stored in publication order, but their ids are a random
/// permutation so that id order (the search tie-break) carries no date
/// information.
pub fn gen_corpus(config: &CorpusConfig, seed: u64) -> Result<Corpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n_papers;

    let mut papers: Vec<Paper> = Vec::with_capacity(n);
    let mut paper_topics: Vec<Vec<usize>> = Vec::with_capacity(n);
    // indices of papers carrying each topic, ascending (== date order)
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); config.n_topics];

    let mut date: Day = 0;
    for i in 0..n {
        date += rng.gen_range(1..=config.max_date_gap);
        let topics = draw_topics(config, &mut rng);
        let keywords = draw_keywords(config, &topics, &mut rng);

        let n_sections = rng.gen_range(1..=config.max_sections);
        let names = section_names(n_sections, &mut rng);
        let mut sections = Vec::with_capacity(n_sections);
        for name in names {
            let focus = *topics.choose(&mut rng).expect("at least one topic");
            let cited = draw_citations(config, i, focus, &keywords, &papers, &members, &mut rng);
            sections.push(Section { name, cited });
        }

        for &t in &topics {
            members[t].push(i);
        }
        paper_topics.push(topics);
        papers.push(Paper {
            id: PaperId(i as u32),
            keywords,
            pub_date: date,
            sections,
        });
    }

    let mut ids: Vec<u32> = (0..n as u32).collect();
    ids.shuffle(&mut rng);
    for p in &mut papers {
        p.id = PaperId(ids[p.id.0 as usize]);
        for s in &mut p.sections {
            for c in &mut s.cited {
                *c = PaperId(ids[c.0 as usize]);
            }
        }
    }
    Ok(Corpus::from_papers(papers)?.with_provenance(seed, config.clone()))
}

fn draw_topics(config: &CorpusConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    // 1, 2, 3 topics with weights 6:3:1, truncated to the configured maximum
    let max = config.max_topics_per_paper.min(3).min(config.n_topics);
    let weights = [6u32, 3, 1];
    let total: u32 = weights[..max].iter().sum();
    let mut r = rng.gen_range(0..total);
    let mut count = 1;
    for (i, w) in weights[..max].iter().enumerate() {
        if r < *w {
            count = i + 1;
            break;
        }
        r -= w;
    }
    let mut all: Vec<usize> = (0..config.n_topics).collect();
    all.shuffle(rng);
    all.truncate(count);
    all
}

fn draw_keywords(config: &CorpusConfig, topics: &[usize], rng: &mut ChaCha8Rng) -> Vec<Keyword> {
    let capacity = topics.len() * config.keywords_per_topic;
    let target = rng
        .gen_range(config.min_keywords..=config.max_keywords)
        .min(capacity);
    let mut set = BTreeSet::new();
    while set.len() < target {
        // primary topic dominates
        let topic = if topics.len() == 1 || rng.gen_bool(0.6) {
            topics[0]
        } else {
            topics[rng.gen_range(1..topics.len())]
        };
        let range = config.topic_keywords(topic);
        set.insert(rng.gen_range(range));
    }
    set.into_iter().collect()
}

fn section_names(n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut idx: Vec<usize> = (0..SECTION_NAMES.len()).collect();
    idx.shuffle(rng);
    let mut picked: Vec<usize> = idx.into_iter().take(n).collect();
    picked.sort_unstable();
    let mut names: Vec<String> = picked.iter().map(|&i| SECTION_NAMES[i].to_string()).collect();
    for extra in names.len()..n {
        names.push(format!("Appendix {}", extra - SECTION_NAMES.len() + 1));
    }
    names
}

fn draw_citations(
    config: &CorpusConfig,
    citing: usize,
    focus: usize,
    citing_keywords: &[Keyword],
    earlier: &[Paper],
    members: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
) -> Vec<PaperId> {
    if citing == 0 || config.max_cited_per_section == 0 {
        return Vec::new();
    }
    let count = rng.gen_range(0..=config.max_cited_per_section).min(citing);
    let pool = &members[focus];
    let mut weights: Vec<f64> = pool
        .iter()
        .map(|&j| {
            let s = super::keyword_overlap(citing_keywords, &earlier[j].keywords) as f64;
            (1.0 + s).powf(config.citation_affinity)
        })
        .collect();

    let mut chosen: Vec<PaperId> = Vec::with_capacity(count);
    let mut attempts = 0;
    while chosen.len() < count && attempts < count * 8 {
        attempts += 1;
        let pick = if rng.gen_bool(config.same_topic_citation) {
            match weighted_pick(&weights, rng) {
                Some(k) => {
                    weights[k] = 0.0;
                    pool[k]
                }
                None => rng.gen_range(0..citing),
            }
        } else {
            rng.gen_range(0..citing)
        };
        let id = PaperId(pick as u32);
        if !chosen.contains(&id) {
            chosen.push(id);
        }
    }
    chosen
}

fn weighted_pick(weights: &[f64], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut r = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if r < *w {
                return Some(i);
            }
            r -= w;
        }
    }
    weights.iter().rposition(|w| *w > 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryConfig {
    /// Number of keywords per query. Candidate searches number this plus two.
    pub query_keywords: usize,
    /// A paper answers a query iff it covers at least this fraction of the
    /// query's keywords.
    pub relevance_threshold: f64,
    /// Queries are anchored on papers from this fraction of the timeline
    /// onwards, so enough earlier work exists.
    pub min_source_fraction: f64,
    pub min_answers: usize,
    pub max_retries: usize,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            query_keywords: 6,
            relevance_threshold: 0.5,
            min_source_fraction: 0.3,
            min_answers: 1,
            max_retries: 1000,
        }
    }
}

/// Papers dated strictly before `query_date` that cover at least
/// `threshold` of `keywords`.
pub fn answer_set(
    corpus: &Corpus,
    keywords: &[Keyword],
    query_date: Day,
    threshold: f64,
) -> BTreeSet<PaperId> {
    if keywords.is_empty() {
        return BTreeSet::new();
    }
    corpus
        .papers()
        .iter()
        .filter(|p| p.pub_date < query_date)
        .filter(|p| super::keyword_overlap(keywords, &p.keywords) as f64 / keywords.len() as f64 >= threshold)
        .map(|p| p.id)
        .collect()
}

/// Builds a query with its answer set and candidate searches.
///
/// `distractor` is appended to the full keyword set to form the superset
/// search. Fails with a generation error if the answer set is empty.
pub fn make_query(
    corpus: &Corpus,
    id: QueryId,
    keywords: Vec<Keyword>,
    query_date: Day,
    distractor: Keyword,
    threshold: f64,
) -> Result<Query> {
    let mut keywords = keywords;
    keywords.sort_unstable();
    keywords.dedup();
    let answers = answer_set(corpus, &keywords, query_date, threshold);
    if answers.is_empty() {
        return Err(LabError::Generation {
            retries: 0,
            reason: format!("query {} has an empty answer set", id.0),
        });
    }
    Ok(Query {
        id,
        candidate_searches: candidate_searches(&keywords, distractor),
        keywords,
        query_date,
        answers,
    })
}

fn candidate_searches(keywords: &[Keyword], distractor: Keyword) -> Vec<SearchSpec> {
    let mut specs = Vec::with_capacity(keywords.len() + 2);
    specs.push(SearchSpec {
        keywords: keywords.to_vec(),
        label: "all".into(),
    });
    for &k in keywords {
        specs.push(SearchSpec {
            keywords: vec![k],
            label: format!("only-{k}"),
        });
    }
    let mut sup = keywords.to_vec();
    if !sup.contains(&distractor) {
        sup.push(distractor);
        sup.sort_unstable();
    }
    specs.push(SearchSpec {
        keywords: sup,
        label: format!("all+{distractor}"),
    });
    specs
}

pub fn gen_queries(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<Query>> {
    gen_queries_with(corpus, &QueryConfig::default(), n, seed)
}

/// Generates `n` queries anchored on randomly chosen source papers.
///
/// A query takes the source paper's keywords from its dominant topic, fills
/// up to `query_keywords` from the same topic vocabulary, and is dated at the
/// source's publication day, so its answers are strictly older work.
pub fn gen_queries_with(corpus: &Corpus, qcfg: &QueryConfig, n: usize, seed: u64) -> Result<Vec<Query>> {
    if n == 0 {
        return Err(LabError::config("n", "must be at least 1"));
    }
    if qcfg.query_keywords == 0 {
        return Err(LabError::config("query_keywords", "must be at least 1"));
    }
    let ccfg = corpus
        .config()
        .ok_or_else(|| LabError::config("corpus", "query generation needs the corpus config echo"))?;
    if qcfg.query_keywords > ccfg.keywords_per_topic {
        return Err(LabError::config(
            "query_keywords",
            "cannot exceed keywords_per_topic",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_date: Vec<&Paper> = corpus.papers().iter().collect();
    by_date.sort_by_key(|p| (p.pub_date, p.id));
    let start = ((corpus.len() as f64) * qcfg.min_source_fraction) as usize;
    let start = start.min(corpus.len().saturating_sub(1));

    let mut out = Vec::with_capacity(n);
    let mut retries = 0;
    while out.len() < n {
        if retries > qcfg.max_retries {
            return Err(LabError::Generation {
                retries,
                reason: format!(
                    "corpus too small: only {} of {} queries had at least {} answers",
                    out.len(),
                    n,
                    qcfg.min_answers.max(1)
                ),
            });
        }
        let source = by_date[rng.gen_range(start..corpus.len())];
        let mut by_topic = std::collections::BTreeMap::<usize, Vec<Keyword>>::new();
        for &k in &source.keywords {
            by_topic.entry(ccfg.topic_of(k)).or_default().push(k);
        }
        let Some((&topic, own)) = by_topic.iter().max_by_key(|(t, ks)| (ks.len(), usize::MAX - **t)) else {
            retries += 1;
            continue;
        };
        let mut kws: BTreeSet<Keyword> = own.iter().copied().take(qcfg.query_keywords).collect();
        let vocab: Vec<Keyword> = ccfg.topic_keywords(topic).collect();
        while kws.len() < qcfg.query_keywords {
            kws.insert(*vocab.choose(&mut rng).expect("non-empty vocab"));
        }
        let distractor_topic = if ccfg.n_topics > 1 {
            (topic + rng.gen_range(1..ccfg.n_topics)) % ccfg.n_topics
        } else {
            topic
        };
        let distractor = rng.gen_range(ccfg.topic_keywords(distractor_topic));

        let id = QueryId(out.len() as u32);
        match make_query(
            corpus,
            id,
            kws.into_iter().collect(),
            source.pub_date,
            distractor,
            qcfg.relevance_threshold,
        ) {
            Ok(q) if q.answers.len() >= qcfg.min_answers.max(1) => out.push(q),
            _ => retries += 1,
        }
    }
    Ok(out)
}
