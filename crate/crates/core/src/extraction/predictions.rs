//! Adapter for spans produced by an external model.
//!
//! The file uses the corpus span schema restricted to `note_id` and `spans`:
//! `{"note_id":"n-1","spans":[{"dimension":"Stage","value":"III","start":3,"end":6,"raw_text":"III"}]}`

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corpus::{AnnotatedNote, SpanLine};
use crate::model::{check_spans, EntitySpan, SpanError};

#[derive(Debug, thiserror::Error)]
pub enum PredictionError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed prediction: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown note_id {id:?}")]
    UnknownNote { line: usize, id: String },
    #[error("line {line}: duplicate predictions for note {id:?}")]
    DuplicateNote { line: usize, id: String },
    #[error("line {line}: note {note_id:?}: {source}")]
    InvalidSpan {
        line: usize,
        note_id: String,
        #[source]
        source: SpanError,
    },
}

#[derive(Deserialize)]
struct PredictionLine {
    note_id: String,
    #[serde(default)]
    spans: Vec<SpanLine>,
}

pub fn parse_external_predictions<R: BufRead>(
    reader: R,
    corpus: &[AnnotatedNote],
) -> Result<BTreeMap<String, Vec<EntitySpan>>, PredictionError> {
    let texts: HashMap<&str, &str> = corpus.iter().map(|n| (n.id(), n.text())).collect();
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| PredictionError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PredictionLine =
            serde_json::from_str(&line).map_err(|e| PredictionError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        let text = *texts
            .get(p.note_id.as_str())
            .ok_or_else(|| PredictionError::UnknownNote {
                line: line_no,
                id: p.note_id.clone(),
            })?;
        let spans = p
            .spans
            .iter()
            .map(|s| s.resolve(text))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|message| PredictionError::Malformed {
                line: line_no,
                message: format!("note {:?}: {message}", p.note_id),
            })?;
        check_spans(text, &spans).map_err(|source| PredictionError::InvalidSpan {
            line: line_no,
            note_id: p.note_id.clone(),
            source,
        })?;
        if out.insert(p.note_id.clone(), spans).is_some() {
            return Err(PredictionError::DuplicateNote {
                line: line_no,
                id: p.note_id,
            });
        }
    }
    Ok(out)
}

/// Reads and validates an external predictions file against `corpus`.
///
/// Notes without a prediction line are simply absent from the map.
pub fn load_external_predictions(
    path: impl AsRef<Path>,
    corpus: &[AnnotatedNote],
) -> Result<BTreeMap<String, Vec<EntitySpan>>, PredictionError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| PredictionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_external_predictions(std::io::BufReader::new(file), corpus)
}
