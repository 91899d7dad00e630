//! Note corpora on disk, cohort eligibility and the seeded train/validation/test split.
//!
//! Corpus files hold one JSON object per line:
//!
//! ```text
//! {"note_id":"n-1","site_id":"site1","text":"...","provenance":"real",
//!  "annotation_source":"gold","spans":[{"dimension":"Stage","value":"III","start":10,"end":13}],
//!  "record":{"status":"Periodontitis","stage":"III"},"meta":{...}}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    char_slice, check_spans, DiagnosisRecord, Dimension, EntitySpan, SpanError, Violation,
};
use crate::normalization::{normalize_value, GuidelineVersion};
use crate::synthesis::QaVerdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Real,
    LlmGenerated,
    OfflineGenerated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    Gold,
    Predicted,
    Embedded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Note {
    pub note_id: String,
    pub site_id: String,
    pub text: String,
    pub provenance: Provenance,
}

/// Eligibility inputs taken from the chart. Not parsed from note text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientMeta {
    pub age: u32,
    pub natural_teeth_count: u32,
    pub has_full_mouth_radiographs: bool,
    /// Pocket depth, clinical attachment loss and CEJ distance were recorded.
    pub has_periodontal_charting: bool,
}

impl PatientMeta {
    pub fn is_valid(&self) -> bool {
        self.natural_teeth_count <= 32
    }
}

pub const MIN_AGE: u32 = 16;
pub const MIN_NATURAL_TEETH: u32 = 10;

/// Inclusion criteria: at least 16 years old, at least 10 natural teeth, a
/// full-mouth radiograph series and a complete periodontal charting.
pub fn cohort_filter(meta: &PatientMeta) -> bool {
    meta.age >= MIN_AGE
        && meta.natural_teeth_count >= MIN_NATURAL_TEETH
        && meta.has_full_mouth_radiographs
        && meta.has_periodontal_charting
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedNote {
    pub note: Note,
    pub spans: Vec<EntitySpan>,
    pub record: Option<DiagnosisRecord>,
    pub annotation_source: AnnotationSource,
    pub meta: Option<PatientMeta>,
    pub qa: Option<QaVerdict>,
    pub guideline: Option<GuidelineVersion>,
    pub hedged: bool,
}

impl AnnotatedNote {
    pub fn new(note: Note, annotation_source: AnnotationSource) -> Self {
        AnnotatedNote {
            note,
            spans: Vec::new(),
            record: None,
            annotation_source,
            meta: None,
            qa: None,
            guideline: None,
            hedged: false,
        }
    }

    pub fn id(&self) -> &str {
        &self.note.note_id
    }

    pub fn text(&self) -> &str {
        &self.note.text
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate note_id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: note {note_id:?}: {source}")]
    InvalidSpan {
        line: usize,
        note_id: String,
        #[source]
        source: SpanError,
    },
    #[error("line {line}: note {note_id:?}: invalid record: {}", join_violations(.violations))]
    InvalidRecord {
        line: usize,
        note_id: String,
        violations: Vec<Violation>,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// On-disk form of a span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SpanLine {
    pub dimension: Dimension,
    pub value: String,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

impl SpanLine {
    fn from_span(s: &EntitySpan) -> Self {
        SpanLine {
            dimension: s.dimension(),
            value: s.value.canonical().to_string(),
            start: s.start,
            end: s.end,
            raw_text: Some(s.raw_text.clone()),
        }
    }

    /// Resolves against the note text. The value string goes through
    /// `normalize_value`, so externally produced labels may use any
    /// accepted surface form.
    pub(crate) fn resolve(&self, text: &str) -> Result<EntitySpan, String> {
        let value = normalize_value(self.dimension, &self.value)
            .ok_or_else(|| format!("unrecognized {} value {:?}", self.dimension, self.value))?;
        let len = text.chars().count();
        let raw_text = match &self.raw_text {
            Some(r) => r.clone(),
            None if self.start < self.end && self.end <= len => {
                char_slice(text, self.start, self.end).to_string()
            }
            None => String::new(),
        };
        Ok(EntitySpan {
            value,
            raw_text,
            start: self.start,
            end: self.end,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NoteLine {
    note_id: String,
    site_id: String,
    text: String,
    provenance: Provenance,
    annotation_source: AnnotationSource,
    #[serde(default)]
    spans: Vec<SpanLine>,
    #[serde(default)]
    record: Option<DiagnosisRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<PatientMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qa: Option<QaVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    guideline: Option<GuidelineVersion>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    hedged: bool,
}

fn to_line(n: &AnnotatedNote) -> NoteLine {
    NoteLine {
        note_id: n.note.note_id.clone(),
        site_id: n.note.site_id.clone(),
        text: n.note.text.clone(),
        provenance: n.note.provenance,
        annotation_source: n.annotation_source,
        spans: n.spans.iter().map(SpanLine::from_span).collect(),
        record: n.record,
        meta: n.meta,
        qa: n.qa.clone(),
        guideline: n.guideline,
        hedged: n.hedged,
    }
}

fn from_line(line_no: usize, l: NoteLine) -> Result<AnnotatedNote, CorpusError> {
    if l.note_id.is_empty() {
        return Err(CorpusError::Malformed {
            line: line_no,
            message: "empty note_id".into(),
        });
    }
    let mut spans = Vec::with_capacity(l.spans.len());
    for s in &l.spans {
        spans.push(
            s.resolve(&l.text)
                .map_err(|message| CorpusError::Malformed {
                    line: line_no,
                    message: format!("note {:?}: {message}", l.note_id),
                })?,
        );
    }
    check_spans(&l.text, &spans).map_err(|source| CorpusError::InvalidSpan {
        line: line_no,
        note_id: l.note_id.clone(),
        source,
    })?;
    if let Some(r) = &l.record {
        r.validate()
            .map_err(|violations| CorpusError::InvalidRecord {
                line: line_no,
                note_id: l.note_id.clone(),
                violations,
            })?;
    }
    if let Some(m) = &l.meta {
        if !m.is_valid() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!(
                    "note {:?}: natural_teeth_count {} exceeds 32",
                    l.note_id, m.natural_teeth_count
                ),
            });
        }
    }
    Ok(AnnotatedNote {
        note: Note {
            note_id: l.note_id,
            site_id: l.site_id,
            text: l.text,
            provenance: l.provenance,
        },
        spans,
        record: l.record,
        annotation_source: l.annotation_source,
        meta: l.meta,
        qa: l.qa,
        guideline: l.guideline,
        hedged: l.hedged,
    })
}

/// Parses a corpus from any reader. Blank lines are skipped.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<AnnotatedNote>, CorpusError> {
    let mut notes = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: NoteLine = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let note = from_line(line_no, parsed)?;
        if !seen.insert(note.note.note_id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: note.note.note_id,
            });
        }
        notes.push(note);
    }
    Ok(notes)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<AnnotatedNote>, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    parse_corpus(BufReader::new(file))
}

pub fn corpus_to_string(notes: &[AnnotatedNote]) -> String {
    let mut out = String::new();
    for n in notes {
        out.push_str(&serde_json::to_string(&to_line(n)).expect("corpus line serializes"));
        out.push('\n');
    }
    out
}

/// Writes `contents` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CorpusError::io(path, e))?;
    tmp.write_all(contents)
        .map_err(|e| CorpusError::io(path, e))?;
    tmp.flush().map_err(|e| CorpusError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| CorpusError::io(path, e.error))?;
    Ok(())
}

pub fn write_corpus(notes: &[AnnotatedNote], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    write_atomic(path, corpus_to_string(notes).as_bytes())
}

#[derive(Debug, Deserialize)]
struct MetaLine {
    note_id: String,
    #[serde(flatten)]
    meta: PatientMeta,
}

/// Reads a line-delimited file of `{note_id, age, natural_teeth_count,
/// has_full_mouth_radiographs, has_periodontal_charting}` objects.
pub fn read_meta(path: impl AsRef<Path>) -> Result<BTreeMap<String, PatientMeta>, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let m: MetaLine = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if !m.meta.is_valid() {
            return Err(CorpusError::Malformed {
                line: line_no,
                message: format!(
                    "natural_teeth_count {} exceeds 32",
                    m.meta.natural_teeth_count
                ),
            });
        }
        if out.insert(m.note_id.clone(), m.meta).is_some() {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: m.note_id,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("cannot split {0} notes into 3 partitions")]
    TooFewNotes(usize),
}

const RATIO_EPS: f64 = 1e-9;

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, SplitError> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.check()?;
        Ok(r)
    }

    fn check(&self) -> Result<(), SplitError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(SplitError::InvalidRatios(
                "every partition ratio must be positive".into(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(SplitError::InvalidRatios(format!(
                "ratios sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

impl FromStr for SplitRatios {
    type Err = SplitError;

    /// Parses `8:1:1` style weights and normalizes them to sum to 1.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| SplitError::InvalidRatios(format!("{s:?}: {e}")))?;
        if parts.len() != 3 {
            return Err(SplitError::InvalidRatios(format!(
                "{s:?}: expected three parts"
            )));
        }
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(SplitError::InvalidRatios(format!(
                "{s:?}: every part must be positive"
            )));
        }
        let total: f64 = parts.iter().sum();
        SplitRatios::new(parts[0] / total, parts[1] / total, parts[2] / total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub membership: BTreeMap<String, Partition>,
}

impl SplitManifest {
    pub fn count(&self, p: Partition) -> usize {
        self.membership.values().filter(|&&x| x == p).count()
    }

    pub fn ids(&self, p: Partition) -> Vec<&str> {
        self.membership
            .iter()
            .filter(|(_, &x)| x == p)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Partition sizes: validation and test get `floor(r * n)`, train gets the rest.
pub fn split_sizes(n: usize, ratios: &SplitRatios) -> (usize, usize, usize) {
    let floor = |r: f64| ((r * n as f64) + RATIO_EPS).floor() as usize;
    let validation = floor(ratios.validation);
    let test = floor(ratios.test);
    (n - validation - test, validation, test)
}

/// Seeded shuffle of the note ids followed by contiguous slicing.
pub fn split_corpus(
    notes: &[AnnotatedNote],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitManifest, SplitError> {
    ratios.check()?;
    if notes.len() < 3 {
        return Err(SplitError::TooFewNotes(notes.len()));
    }
    let mut ids: Vec<&str> = notes.iter().map(|n| n.id()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let (train, validation, _) = split_sizes(ids.len(), &ratios);
    let membership = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let p = if i < train {
                Partition::Train
            } else if i < train + validation {
                Partition::Validation
            } else {
                Partition::Test
            };
            (id.to_string(), p)
        })
        .collect();
    Ok(SplitManifest {
        seed,
        ratios,
        membership,
    })
}
