//! JSON-lines persistence. Each file starts with a header line naming the
//! format and version, followed by one record per line.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusConfig, Paper, Query};
use crate::error::{LabError, Result};

pub const CORPUS_FORMAT: &str = "pasa-lab-corpus";
pub const QUERIES_FORMAT: &str = "pasa-lab-queries";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<CorpusConfig>,
}

fn json_err(source_name: &str, line: usize, e: serde_json::Error) -> LabError {
    LabError::Parse {
        source_name: source_name.to_string(),
        line,
        reason: e.to_string(),
    }
}

fn write_lines<W: Write, T: Serialize>(
    w: W,
    header: &Header,
    records: impl Iterator<Item = T>,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

fn read_lines<R: Read, T: for<'de> Deserialize<'de>>(
    r: R,
    source_name: &str,
    expected_format: &str,
) -> Result<(Header, Vec<T>)> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => {
                return Err(LabError::Parse {
                    source_name: source_name.into(),
                    line: 1,
                    reason: "missing header line".into(),
                })
            }
            Some((i, line)) => {
                let line = line.map_err(|e| LabError::io(source_name, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| json_err(source_name, i + 1, e))?;
            }
        }
    };
    if header.format != expected_format || header.version != VERSION {
        return Err(LabError::Parse {
            source_name: source_name.into(),
            line: 1,
            reason: format!(
                "expected format {expected_format} v{VERSION}, found {} v{}",
                header.format, header.version
            ),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| LabError::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| json_err(source_name, i + 1, e))?);
    }
    Ok((header, out))
}

pub fn write_corpus<W: Write>(corpus: &Corpus, w: W) -> std::io::Result<()> {
    let header = Header {
        format: CORPUS_FORMAT.into(),
        version: VERSION,
        seed: corpus.seed(),
        config: corpus.config().cloned(),
    };
    write_lines(w, &header, corpus.papers().iter())
}

pub fn read_corpus<R: Read>(r: R, source_name: &str) -> Result<Corpus> {
    let (header, papers) = read_lines::<_, Paper>(r, source_name, CORPUS_FORMAT)?;
    let corpus = Corpus::from_papers(papers)?;
    Ok(match (header.seed, header.config) {
        (Some(seed), Some(config)) => corpus.with_provenance(seed, config),
        _ => corpus,
    })
}

pub fn write_queries<W: Write>(queries: &[Query], w: W) -> std::io::Result<()> {
    let header = Header {
        format: QUERIES_FORMAT.into(),
        version: VERSION,
        seed: None,
        config: None,
    };
    write_lines(w, &header, queries.iter())
}

pub fn read_queries<R: Read>(r: R, source_name: &str) -> Result<Vec<Query>> {
    Ok(read_lines(r, source_name, QUERIES_FORMAT)?.1)
}
