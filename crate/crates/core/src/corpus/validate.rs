use std::collections::HashSet;
use std::fmt;

use super::{Corpus, Day, PaperId, Query, QueryId};

/// One broken invariant, naming the offending ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingCitation {
        paper: PaperId,
        cited: PaperId,
    },
    ForwardEdge {
        paper: PaperId,
        cited: PaperId,
        paper_date: Day,
        cited_date: Day,
    },
    DuplicateSectionName {
        paper: PaperId,
        name: String,
    },
    DuplicateCitation {
        paper: PaperId,
        section: String,
        cited: PaperId,
    },
    UnsortedKeywords {
        paper: PaperId,
    },
    MissingAnswer {
        query: QueryId,
        paper: PaperId,
    },
    LateAnswer {
        query: QueryId,
        paper: PaperId,
    },
    EmptyAnswers {
        query: QueryId,
    },
    EmptySearches {
        query: QueryId,
    },
    EmptySearchSpec {
        query: QueryId,
        index: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            MissingCitation { paper, cited } => {
                write!(f, "paper {paper} cites missing paper {cited}")
            }
            ForwardEdge {
                paper,
                cited,
                paper_date,
                cited_date,
            } => write!(
                f,
                "edge {paper} -> {cited} is not backward in time ({paper_date} <= {cited_date})"
            ),
            DuplicateSectionName { paper, name } => {
                write!(f, "paper {paper} repeats section name {name:?}")
            }
            DuplicateCitation {
                paper,
                section,
                cited,
            } => write!(f, "paper {paper} section {section:?} cites {cited} twice"),
            UnsortedKeywords { paper } => {
                write!(f, "paper {paper} keywords are not sorted and unique")
            }
            MissingAnswer { query, paper } => {
                write!(f, "query {} answer {paper} is not in the corpus", query.0)
            }
            LateAnswer { query, paper } => {
                write!(f, "query {} answer {paper} is not older than the query", query.0)
            }
            EmptyAnswers { query } => write!(f, "query {} has no answers", query.0),
            EmptySearches { query } => write!(f, "query {} has no candidate searches", query.0),
            EmptySearchSpec { query, index } => {
                write!(f, "query {} search {index} has no keywords", query.0)
            }
        }
    }
}

fn sorted_unique<T: Ord>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

/// Lists every violated corpus invariant. Empty iff the corpus is valid.
///
/// Because every edge must point to a strictly older paper, a report
/// without `ForwardEdge` entries also certifies the citation graph is a DAG.
pub fn validate_corpus(corpus: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();
    for p in corpus.papers() {
        if !sorted_unique(&p.keywords) {
            out.push(Violation::UnsortedKeywords { paper: p.id });
        }
        let mut names = HashSet::new();
        for s in &p.sections {
            if !names.insert(s.name.as_str()) {
                out.push(Violation::DuplicateSectionName {
                    paper: p.id,
                    name: s.name.clone(),
                });
            }
            let mut seen = HashSet::new();
            for &c in &s.cited {
                if !seen.insert(c) {
                    out.push(Violation::DuplicateCitation {
                        paper: p.id,
                        section: s.name.clone(),
                        cited: c,
                    });
                }
                match corpus.get(c) {
                    None => out.push(Violation::MissingCitation {
                        paper: p.id,
                        cited: c,
                    }),
                    Some(target) if target.pub_date >= p.pub_date => out.push(Violation::ForwardEdge {
                        paper: p.id,
                        cited: c,
                        paper_date: p.pub_date,
                        cited_date: target.pub_date,
                    }),
                    Some(_) => {}
                }
            }
        }
    }
    out
}

pub fn validate_queries(corpus: &Corpus, queries: &[Query]) -> Vec<Violation> {
    let mut out = Vec::new();
    for q in queries {
        if q.answers.is_empty() {
            out.push(Violation::EmptyAnswers { query: q.id });
        }
        for &a in &q.answers {
            match corpus.get(a) {
                None => out.push(Violation::MissingAnswer {
                    query: q.id,
                    paper: a,
                }),
                Some(p) if p.pub_date >= q.query_date => out.push(Violation::LateAnswer {
                    query: q.id,
                    paper: a,
                }),
                Some(_) => {}
            }
        }
        if q.candidate_searches.is_empty() {
            out.push(Violation::EmptySearches { query: q.id });
        }
        for (index, s) in q.candidate_searches.iter().enumerate() {
            if s.keywords.is_empty() {
                out.push(Violation::EmptySearchSpec { query: q.id, index });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Paper, Section};

    fn paper(id: u32, date: Day, cited: Vec<u32>) -> Paper {
        Paper {
            id: PaperId(id),
            keywords: vec![1, 2],
            pub_date: date,
            sections: vec![Section {
                name: "Related Work".into(),
                cited: cited.into_iter().map(PaperId).collect(),
            }],
        }
    }

    #[test]
    fn valid_corpus_has_empty_report() {
        let c = Corpus::from_papers(vec![paper(0, 1, vec![]), paper(1, 2, vec![0])]).unwrap();
        assert!(validate_corpus(&c).is_empty());
    }

    #[test]
    fn missing_citation_named() {
        let c = Corpus::from_papers(vec![paper(0, 1, vec![999])]).unwrap();
        let report = validate_corpus(&c);
        assert_eq!(
            report,
            vec![Violation::MissingCitation {
                paper: PaperId(0),
                cited: PaperId(999)
            }]
        );
        assert!(report[0].to_string().contains("999"));
    }

    #[test]
    fn forward_edge_named() {
        let c = Corpus::from_papers(vec![paper(0, 5, vec![1]), paper(1, 9, vec![])]).unwrap();
        let report = validate_corpus(&c);
        assert!(matches!(
            report.as_slice(),
            [Violation::ForwardEdge {
                paper: PaperId(0),
                cited: PaperId(1),
                ..
            }]
        ));
    }

    #[test]
    fn same_day_citation_is_forward() {
        let c = Corpus::from_papers(vec![paper(0, 5, vec![]), paper(1, 5, vec![0])]).unwrap();
        assert_eq!(validate_corpus(&c).len(), 1);
    }

    #[test]
    fn duplicate_names_and_citations() {
        let mut p = paper(1, 5, vec![0, 0]);
        p.sections.push(p.sections[0].clone());
        let c = Corpus::from_papers(vec![paper(0, 1, vec![]), p]).unwrap();
        let report = validate_corpus(&c);
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::DuplicateSectionName { .. })));
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::DuplicateCitation { .. })));
    }
}
