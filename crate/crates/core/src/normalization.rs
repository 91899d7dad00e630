//! Value canonicalization, statement-level record inference, adjudication of
//! several detected diagnoses into one record, and guideline-version checks.

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedNote, AnnotationSource};
use crate::extraction::segment::sentence_bounds;
use crate::extraction::GrammarExtractor;
use crate::model::{
    max_extent, max_grade, max_severity, max_stage, DiagnosisRecord, Dimension, EntitySpan,
    EntityValue, Extent, Grade, PeriodontalStatus, Stage, Subtype,
};

const STATUS_VOCAB: &[(&str, PeriodontalStatus)] = &[
    ("periodontitis", PeriodontalStatus::Periodontitis),
    ("gingivitis", PeriodontalStatus::Gingivitis),
    ("health", PeriodontalStatus::Health),
    ("healthy", PeriodontalStatus::Health),
];

const EXTENT_VOCAB: &[(&str, Extent)] = &[
    ("localized", Extent::Localized),
    ("localised", Extent::Localized),
    ("generalized", Extent::Generalized),
    ("generalised", Extent::Generalized),
];

/// Shortest word that may be matched at edit distance 1.
const MIN_FUZZY_LEN: usize = 4;

/// Looks `word` (already lowercase) up in `vocab`, allowing one edit.
///
/// An exact hit wins. Otherwise all entries within distance 1 are collected;
/// if they disagree on the value the lookup is ambiguous and yields `None`.
pub(crate) fn fuzzy_lookup<V: Copy + PartialEq>(word: &str, vocab: &[(&str, V)]) -> Option<V> {
    if let Some((_, v)) = vocab.iter().find(|(w, _)| *w == word) {
        return Some(*v);
    }
    if word.chars().count() < MIN_FUZZY_LEN {
        return None;
    }
    let mut found: Option<V> = None;
    for (w, v) in vocab {
        if strsim::levenshtein(word, w) <= 1 {
            match found {
                None => found = Some(*v),
                Some(prev) if prev != *v => return None,
                _ => {}
            }
        }
    }
    found
}

pub(crate) fn status_word(word: &str) -> Option<PeriodontalStatus> {
    fuzzy_lookup(&word.to_lowercase(), STATUS_VOCAB)
}

pub(crate) fn extent_word(word: &str) -> Option<Extent> {
    fuzzy_lookup(&word.to_lowercase(), EXTENT_VOCAB)
}

pub(crate) fn stage_numeral(s: &str) -> Option<Stage> {
    match s.to_lowercase().as_str() {
        "i" | "1" => Some(Stage::I),
        "ii" | "2" => Some(Stage::II),
        "iii" | "3" => Some(Stage::III),
        "iv" | "4" => Some(Stage::IV),
        _ => None,
    }
}

pub(crate) fn roman_stage(s: &str) -> Option<Stage> {
    if s.chars().all(|c| matches!(c, 'i' | 'I' | 'v' | 'V')) {
        stage_numeral(s)
    } else {
        None
    }
}

pub(crate) fn grade_letter(s: &str) -> Option<Grade> {
    match s {
        "a" | "A" => Some(Grade::A),
        "b" | "B" => Some(Grade::B),
        "c" | "C" => Some(Grade::C),
        _ => None,
    }
}

fn words(raw: &str) -> Vec<String> {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Drops a leading `keyword` word (and any separators after it).
fn strip_keyword(raw: &str, keyword: &str) -> String {
    let ws = words(raw);
    match ws.split_first() {
        Some((first, rest)) if first == keyword => rest.join(" "),
        _ => ws.join(" "),
    }
}

#[derive(Default)]
struct SubtypeCues {
    intact: bool,
    reduced: bool,
    stable: bool,
    non: bool,
}

pub(crate) fn subtype_from_words<S: AsRef<str>>(ws: &[S]) -> Option<Subtype> {
    const CUES: &[(&str, u8)] = &[
        ("intact", 0),
        ("reduced", 1),
        ("stable", 2),
        ("past", 2),
        ("non", 3),
        ("nonperiodontitis", 3),
    ];
    let mut cues = SubtypeCues::default();
    for w in ws {
        match fuzzy_lookup(w.as_ref(), CUES) {
            Some(0) => cues.intact = true,
            Some(1) => cues.reduced = true,
            Some(2) => cues.stable = true,
            Some(3) => cues.non = true,
            _ => {}
        }
    }
    if cues.intact {
        return if cues.reduced || cues.stable || cues.non {
            None
        } else {
            Some(Subtype::IntactPeriodontium)
        };
    }
    match (cues.stable, cues.non) {
        (true, true) => None,
        (true, false) => Some(Subtype::ReducedPeriodontiumStablePeriodontitis),
        (false, true) => Some(Subtype::ReducedPeriodontiumNonPeriodontitis),
        (false, false) => None,
    }
}

/// Maps a raw surface string to the canonical value of `dimension`.
///
/// Case-insensitive. Stages accept roman I-IV or arabic 1-4, grades accept
/// A-C, and status/extent/subtype words tolerate one edit. Ambiguous or
/// unknown input yields `None`.
pub fn normalize_value(dimension: Dimension, raw_text: &str) -> Option<EntityValue> {
    match dimension {
        Dimension::Stage => {
            stage_numeral(&strip_keyword(raw_text, "stage")).map(EntityValue::Stage)
        }
        Dimension::Grade => {
            let rest = strip_keyword(raw_text, "grade");
            grade_letter(&rest).map(EntityValue::Grade)
        }
        Dimension::Status => single_word_value(raw_text, status_word).map(EntityValue::Status),
        Dimension::Extent => single_word_value(raw_text, extent_word).map(EntityValue::Extent),
        Dimension::Subtype => subtype_from_words(&words(raw_text)).map(EntityValue::Subtype),
    }
}

/// Every word that matches must agree on the value.
fn single_word_value<V: Copy + PartialEq>(raw: &str, f: fn(&str) -> Option<V>) -> Option<V> {
    let mut found = None;
    for w in words(raw) {
        if let Some(v) = f(&w) {
            match found {
                None => found = Some(v),
                Some(prev) if prev != v => return None,
                _ => {}
            }
        }
    }
    found
}

#[derive(Default)]
struct Group {
    status: Option<PeriodontalStatus>,
    stage: Option<Stage>,
    grade: Option<Grade>,
    extent: Option<Extent>,
    subtype: Option<Subtype>,
}

impl Group {
    fn is_empty(&self) -> bool {
        self.status.is_none()
            && self.stage.is_none()
            && self.grade.is_none()
            && self.extent.is_none()
            && self.subtype.is_none()
    }

    fn non_periodontitis(&self) -> bool {
        matches!(self.status, Some(s) if s != PeriodontalStatus::Periodontitis)
    }

    fn periodontitis_context(&self) -> bool {
        self.status == Some(PeriodontalStatus::Periodontitis)
            || self.stage.is_some()
            || self.grade.is_some()
    }

    /// Whether `value` belongs to a new diagnosis rather than this one.
    fn starts_new(&self, value: EntityValue) -> bool {
        match value {
            EntityValue::Status(s) => {
                self.status.is_some()
                    || (s != PeriodontalStatus::Periodontitis
                        && (self.stage.is_some() || self.grade.is_some()))
            }
            EntityValue::Stage(_) => self.stage.is_some() || self.non_periodontitis(),
            EntityValue::Grade(_) => self.grade.is_some() || self.non_periodontitis(),
            // extent precedes its head
            EntityValue::Extent(_) => {
                self.extent.is_some()
                    || self.status.is_some()
                    || self.stage.is_some()
                    || self.grade.is_some()
                    || self.subtype.is_some()
            }
            EntityValue::Subtype(_) => self.subtype.is_some() || self.periodontitis_context(),
        }
    }

    fn add(&mut self, value: EntityValue) {
        match value {
            EntityValue::Status(v) => self.status = Some(v),
            EntityValue::Stage(v) => self.stage = Some(v),
            EntityValue::Grade(v) => self.grade = Some(v),
            EntityValue::Extent(v) => self.extent = Some(v),
            EntityValue::Subtype(v) => self.subtype = Some(v),
        }
    }

    fn candidate(&self) -> Option<DiagnosisRecord> {
        let status = self.status.or_else(|| {
            (self.stage.is_some() || self.grade.is_some())
                .then_some(PeriodontalStatus::Periodontitis)
        })?;
        Some(
            DiagnosisRecord {
                status,
                stage: self.stage,
                grade: self.grade,
                extent: self.extent,
                subtype: self.subtype,
            }
            .restricted(),
        )
    }
}

/// Groups a note's spans into diagnosis statements and builds one candidate
/// record per statement.
///
/// Statements never cross sentence boundaries. Inside a sentence a new
/// statement starts when a span repeats a dimension already seen, when an
/// extent adjective follows material it cannot modify, or when the status
/// context changes between periodontitis and the milder statuses. A statement
/// holding a stage or grade but no status word is read as periodontitis.
/// Span values are re-derived from `raw_text` through [`normalize_value`];
/// the stored value is kept when the raw text does not normalize.
pub fn infer_candidates(text: &str, spans: &[EntitySpan]) -> Vec<DiagnosisRecord> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    let sentences = sentence_bounds(text);

    let mut out = Vec::new();
    let mut current = Group::default();
    let mut current_sentence: Option<usize> = None;
    for span in sorted {
        let sentence = sentences
            .iter()
            .position(|&(s, e)| span.start >= s && span.start < e);
        let value = normalize_value(span.dimension(), &span.raw_text)
            .filter(|v| v.dimension() == span.dimension())
            .unwrap_or(span.value);
        if sentence != current_sentence || current.starts_new(value) {
            out.extend(current.candidate());
            current = Group::default();
            current_sentence = sentence;
        }
        current.add(value);
    }
    if !current.is_empty() {
        out.extend(current.candidate());
    }
    out
}

/// Collapses several diagnoses of one note into a single record.
///
/// The most severe status wins. Among candidates sharing that status,
/// stage, grade and extent take their highest present values (blank stays
/// blank). Subtypes are kept only when the present ones agree.
pub fn adjudicate(candidates: &[DiagnosisRecord]) -> Option<DiagnosisRecord> {
    let status = candidates.iter().map(|c| c.status).reduce(max_severity)?;
    let winners = candidates.iter().filter(|c| c.status == status);

    let mut record = DiagnosisRecord::new(status);
    let mut subtype_conflict = false;
    for c in winners {
        record.stage = max_stage(record.stage, c.stage);
        record.grade = max_grade(record.grade, c.grade);
        record.extent = max_extent(record.extent, c.extent);
        match (record.subtype, c.subtype) {
            (None, s) => record.subtype = s,
            (Some(a), Some(b)) if a != b => subtype_conflict = true,
            _ => {}
        }
    }
    if subtype_conflict {
        record.subtype = None;
    }
    Some(record.restricted())
}

/// Spans → statement candidates → single adjudicated record.
pub fn record_from_spans(text: &str, spans: &[EntitySpan]) -> Option<DiagnosisRecord> {
    adjudicate(&infer_candidates(text, spans))
}

/// A predicted copy of `note` carrying `spans` and the record derived from
/// them.
pub fn annotate_prediction(
    note: &AnnotatedNote,
    spans: Vec<EntitySpan>,
    hedged: bool,
) -> AnnotatedNote {
    let mut out = AnnotatedNote::new(note.note.clone(), AnnotationSource::Predicted);
    out.record = record_from_spans(note.text(), &spans);
    out.guideline = out.record.as_ref().map(classify_guideline_version);
    out.spans = spans;
    out.meta = note.meta;
    out.hedged = hedged;
    out
}

/// Runs the grammar extractor over `note` and derives its record.
pub fn predict_note(note: &AnnotatedNote, extractor: &GrammarExtractor) -> AnnotatedNote {
    let ex = extractor.run(note.text());
    let hedged = ex.hedged();
    annotate_prediction(note, ex.spans, hedged)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidelineVersion {
    #[serde(rename = "current_2018")]
    Current2018,
    Legacy,
    NotApplicable,
}

/// Periodontitis diagnoses that carry both a stage and a grade follow the
/// 2018 classification; periodontitis diagnoses missing either predate it.
pub fn classify_guideline_version(r: &DiagnosisRecord) -> GuidelineVersion {
    match r.status {
        PeriodontalStatus::Periodontitis if r.stage.is_some() && r.grade.is_some() => {
            GuidelineVersion::Current2018
        }
        PeriodontalStatus::Periodontitis => GuidelineVersion::Legacy,
        _ => GuidelineVersion::NotApplicable,
    }
}
