use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use serde::{Deserialize, Serialize};

use super::{Action, Session, SessionKind};
use crate::corpus::PaperId;
use crate::error::{LabError, Result};

/// One line of a rollout trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub session_idx: usize,
    pub kind: SessionKind,
    pub action: Action,
    pub new_papers: Vec<PaperId>,
    pub logprob_old: f64,
}

/// Writes one JSON line per transition.
pub fn write_trace<W: Write>(sessions: &[Session], w: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    for (session_idx, s) in sessions.iter().enumerate() {
        for t in &s.transitions {
            let rec = TraceRecord {
                session_idx,
                kind: t.kind,
                action: t.action,
                new_papers: t.new_papers.clone(),
                logprob_old: t.logprob_old,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| LabError::io("trace", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LabError::Parse {
            source_name: "trace".into(),
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}
