use crate::corpus::{keyword_overlap, Corpus, Day, PaperId, SearchSpec};
use crate::error::{LabError, Result};

/// Keyword search restricted to papers published before `query_date`.
///
/// Results are ranked by descending keyword overlap with the spec, ties by
/// ascending id; papers with zero overlap are never returned.
pub fn search(corpus: &Corpus, spec: &SearchSpec, query_date: Day, limit: usize) -> Vec<PaperId> {
    let mut hits: Vec<(usize, PaperId)> = corpus
        .papers()
        .iter()
        .filter(|p| p.pub_date < query_date)
        .filter_map(|p| {
            let score = keyword_overlap(&spec.keywords, &p.keywords);
            (score > 0).then_some((score, p.id))
        })
        .collect();
    hits.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    hits.truncate(limit);
    hits.into_iter().map(|(_, id)| id).collect()
}

/// The citations of one section, in stored order.
pub fn expand(corpus: &Corpus, paper: PaperId, section: usize) -> Result<Vec<PaperId>> {
    let p = corpus.paper(paper)?;
    p.sections.get(section).map(|s| s.cited.clone()).ok_or_else(|| {
        LabError::Lookup(format!(
            "paper {paper} has no section {section} ({} sections)",
            p.sections.len()
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Paper, Section};

    fn corpus() -> Corpus {
        let mk = |id: u32, kw: Vec<u32>, date: u32, cited: Vec<u32>| Paper {
            id: PaperId(id),
            keywords: kw,
            pub_date: date,
            sections: vec![
                Section {
                    name: "Related Work".into(),
                    cited: cited.into_iter().map(PaperId).collect(),
                },
                Section {
                    name: "Method".into(),
                    cited: vec![],
                },
            ],
        };
        Corpus::from_papers(vec![
            mk(0, vec![1], 1, vec![]),
            mk(1, vec![1, 2], 2, vec![]),
            mk(2, vec![3], 3, vec![]),
            mk(3, vec![1, 2], 4, vec![]),
            mk(8, vec![1, 2], 50, vec![4, 7]),
        ])
        .unwrap()
    }

    fn spec(kw: Vec<u32>) -> SearchSpec {
        SearchSpec {
            keywords: kw,
            label: "t".into(),
        }
    }

    #[test]
    fn disjoint_search_is_empty() {
        assert!(search(&corpus(), &spec(vec![99]), 100, 10).is_empty());
    }

    #[test]
    fn ranks_by_score_then_id() {
        let c = corpus();
        let s = spec(vec![1, 2]);
        // brute force: score every paper, sort by (-score, id)
        let mut brute: Vec<(usize, u32)> = c
            .papers()
            .iter()
            .filter(|p| p.pub_date < 10)
            .map(|p| {
                (
                    s.keywords.iter().filter(|k| p.keywords.contains(k)).count(),
                    p.id.0,
                )
            })
            .filter(|(sc, _)| *sc > 0)
            .collect();
        brute.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let expected: Vec<PaperId> = brute.into_iter().map(|(_, id)| PaperId(id)).collect();
        assert_eq!(search(&c, &s, 10, 10), expected);
        assert_eq!(expected, vec![PaperId(1), PaperId(3), PaperId(0)]);
        assert_eq!(search(&c, &s, 10, 2), vec![PaperId(1), PaperId(3)]);
    }

    #[test]
    fn future_papers_never_returned() {
        let found = search(&corpus(), &spec(vec![1, 2]), 5, 10);
        assert!(!found.contains(&PaperId(8)));
        // same-day papers are excluded too
        assert!(!search(&corpus(), &spec(vec![1, 2]), 4, 10).contains(&PaperId(3)));
    }

    #[test]
    fn expand_reads_section() {
        let c = corpus();
        assert_eq!(expand(&c, PaperId(8), 0).unwrap(), vec![PaperId(4), PaperId(7)]);
        assert!(expand(&c, PaperId(8), 1).unwrap().is_empty());
        assert!(matches!(expand(&c, PaperId(8), 2), Err(LabError::Lookup(_))));
        assert!(matches!(expand(&c, PaperId(77), 0), Err(LabError::Lookup(_))));
    }
}
