//! Entity taxonomy, diagnosis records and the severity orderings used when
//! several diagnoses have to be merged into one.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Periodontal status. The derived `Ord` is the severity order
/// `Health < Gingivitis < Periodontitis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PeriodontalStatus {
    Health,
    Gingivitis,
    Periodontitis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    I,
    II,
    III,
    IV,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Extent {
    Localized,
    Generalized,
}

/// Condition of the periodontium for gingivitis and health diagnoses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subtype {
    IntactPeriodontium,
    ReducedPeriodontiumStablePeriodontitis,
    ReducedPeriodontiumNonPeriodontitis,
}

impl PeriodontalStatus {
    pub const ALL: [PeriodontalStatus; 3] = [
        PeriodontalStatus::Health,
        PeriodontalStatus::Gingivitis,
        PeriodontalStatus::Periodontitis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PeriodontalStatus::Health => "Health",
            PeriodontalStatus::Gingivitis => "Gingivitis",
            PeriodontalStatus::Periodontitis => "Periodontitis",
        }
    }
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::I, Stage::II, Stage::III, Stage::IV];

    pub fn roman(self) -> &'static str {
        match self {
            Stage::I => "I",
            Stage::II => "II",
            Stage::III => "III",
            Stage::IV => "IV",
        }
    }

    pub fn arabic(self) -> u8 {
        self as u8 + 1
    }
}

impl Grade {
    pub const ALL: [Grade; 3] = [Grade::A, Grade::B, Grade::C];

    pub fn letter(self) -> &'static str {
        match self {
            Grade::A => "A",
            Grade::B => "B",
            Grade::C => "C",
        }
    }
}

impl Extent {
    pub const ALL: [Extent; 2] = [Extent::Localized, Extent::Generalized];

    pub fn name(self) -> &'static str {
        match self {
            Extent::Localized => "Localized",
            Extent::Generalized => "Generalized",
        }
    }
}

impl Subtype {
    pub const ALL: [Subtype; 3] = [
        Subtype::IntactPeriodontium,
        Subtype::ReducedPeriodontiumStablePeriodontitis,
        Subtype::ReducedPeriodontiumNonPeriodontitis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subtype::IntactPeriodontium => "Intact Periodontium",
            Subtype::ReducedPeriodontiumStablePeriodontitis => {
                "Reduced Periodontium, Stable Periodontitis"
            }
            Subtype::ReducedPeriodontiumNonPeriodontitis => {
                "Reduced Periodontium, Non-Periodontitis"
            }
        }
    }
}

/// Returns the more severe of two statuses.
pub fn max_severity(a: PeriodontalStatus, b: PeriodontalStatus) -> PeriodontalStatus {
    a.max(b)
}

/// Join where `None` is the bottom element.
fn join<T: Ord>(a: Option<T>, b: Option<T>) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

pub fn max_stage(a: Option<Stage>, b: Option<Stage>) -> Option<Stage> {
    join(a, b)
}

pub fn max_grade(a: Option<Grade>, b: Option<Grade>) -> Option<Grade> {
    join(a, b)
}

/// `Generalized` wins over `Localized`.
pub fn max_extent(a: Option<Extent>, b: Option<Extent>) -> Option<Extent> {
    join(a, b)
}

/// The five annotated dimensions of a periodontal diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Status,
    Stage,
    Grade,
    Extent,
    Subtype,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Status,
        Dimension::Stage,
        Dimension::Grade,
        Dimension::Extent,
        Dimension::Subtype,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Status => "Status",
            Dimension::Stage => "Stage",
            Dimension::Grade => "Grade",
            Dimension::Extent => "Extent",
            Dimension::Subtype => "Subtype",
        }
    }

    /// Row label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Dimension::Status => "Periodontal status",
            other => other.name(),
        }
    }

    /// Every value of this dimension, in ascending order.
    pub fn values(self) -> Vec<EntityValue> {
        match self {
            Dimension::Status => PeriodontalStatus::ALL
                .iter()
                .map(|&v| EntityValue::Status(v))
                .collect(),
            Dimension::Stage => Stage::ALL.iter().map(|&v| EntityValue::Stage(v)).collect(),
            Dimension::Grade => Grade::ALL.iter().map(|&v| EntityValue::Grade(v)).collect(),
            Dimension::Extent => Extent::ALL
                .iter()
                .map(|&v| EntityValue::Extent(v))
                .collect(),
            Dimension::Subtype => Subtype::ALL
                .iter()
                .map(|&v| EntityValue::Subtype(v))
                .collect(),
        }
    }

    pub fn parse(s: &str) -> Option<Dimension> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "status" | "periodontal status" | "periodontal_status" => Some(Dimension::Status),
            "stage" => Some(Dimension::Stage),
            "grade" => Some(Dimension::Grade),
            "extent" => Some(Dimension::Extent),
            "subtype" => Some(Dimension::Subtype),
            _ => None,
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A normalized value tagged with its dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityValue {
    Status(PeriodontalStatus),
    Stage(Stage),
    Grade(Grade),
    Extent(Extent),
    Subtype(Subtype),
}

impl EntityValue {
    pub fn dimension(self) -> Dimension {
        match self {
            EntityValue::Status(_) => Dimension::Status,
            EntityValue::Stage(_) => Dimension::Stage,
            EntityValue::Grade(_) => Dimension::Grade,
            EntityValue::Extent(_) => Dimension::Extent,
            EntityValue::Subtype(_) => Dimension::Subtype,
        }
    }

    /// Canonical surface form; `normalize_value` maps it back to `self`.
    pub fn canonical(self) -> &'static str {
        match self {
            EntityValue::Status(v) => v.name(),
            EntityValue::Stage(v) => v.roman(),
            EntityValue::Grade(v) => v.letter(),
            EntityValue::Extent(v) => v.name(),
            EntityValue::Subtype(v) => v.name(),
        }
    }
}

impl fmt::Display for EntityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical())
    }
}

/// The normalized single diagnosis of one note. Absent fields mean "left blank".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiagnosisRecord {
    pub status: PeriodontalStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<Grade>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<Extent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<Subtype>,
}

/// A broken record invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    SubtypeNotPermitted(PeriodontalStatus),
    StageNotPermitted(PeriodontalStatus),
    GradeNotPermitted(PeriodontalStatus),
    ExtentNotPermitted(PeriodontalStatus),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (field, status) = match self {
            Violation::SubtypeNotPermitted(s) => ("subtype", s),
            Violation::StageNotPermitted(s) => ("stage", s),
            Violation::GradeNotPermitted(s) => ("grade", s),
            Violation::ExtentNotPermitted(s) => ("extent", s),
        };
        write!(
            f,
            "{field} not permitted for {}",
            status.name().to_lowercase()
        )
    }
}

impl DiagnosisRecord {
    pub fn new(status: PeriodontalStatus) -> Self {
        DiagnosisRecord {
            status,
            stage: None,
            grade: None,
            extent: None,
            subtype: None,
        }
    }

    pub fn periodontitis(
        stage: Option<Stage>,
        grade: Option<Grade>,
        extent: Option<Extent>,
    ) -> Self {
        DiagnosisRecord {
            stage,
            grade,
            extent,
            ..DiagnosisRecord::new(PeriodontalStatus::Periodontitis)
        }
    }

    pub fn gingivitis(extent: Option<Extent>, subtype: Option<Subtype>) -> Self {
        DiagnosisRecord {
            extent,
            subtype,
            ..DiagnosisRecord::new(PeriodontalStatus::Gingivitis)
        }
    }

    pub fn health(subtype: Option<Subtype>) -> Self {
        DiagnosisRecord {
            subtype,
            ..DiagnosisRecord::new(PeriodontalStatus::Health)
        }
    }

    /// Value held for `dim`, if any.
    pub fn get(&self, dim: Dimension) -> Option<EntityValue> {
        match dim {
            Dimension::Status => Some(EntityValue::Status(self.status)),
            Dimension::Stage => self.stage.map(EntityValue::Stage),
            Dimension::Grade => self.grade.map(EntityValue::Grade),
            Dimension::Extent => self.extent.map(EntityValue::Extent),
            Dimension::Subtype => self.subtype.map(EntityValue::Subtype),
        }
    }

    /// Dimensions that may carry a value under this record's status.
    pub fn permitted_dimensions(status: PeriodontalStatus) -> &'static [Dimension] {
        match status {
            PeriodontalStatus::Periodontitis => &[
                Dimension::Status,
                Dimension::Stage,
                Dimension::Grade,
                Dimension::Extent,
            ],
            PeriodontalStatus::Gingivitis => {
                &[Dimension::Status, Dimension::Extent, Dimension::Subtype]
            }
            PeriodontalStatus::Health => &[Dimension::Status, Dimension::Subtype],
        }
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        validate_record(self)
    }

    pub fn is_valid(&self) -> bool {
        validate_record(self).is_ok()
    }

    /// Drops every field that the status does not permit.
    pub fn restricted(mut self) -> Self {
        use PeriodontalStatus::*;
        match self.status {
            Periodontitis => self.subtype = None,
            Gingivitis => {
                self.stage = None;
                self.grade = None;
            }
            Health => {
                self.stage = None;
                self.grade = None;
                self.extent = None;
            }
        }
        self
    }

    /// All records that pass validation. Small enough to enumerate (76).
    pub fn enumerate_legal() -> Vec<DiagnosisRecord> {
        fn opts<T: Copy>(all: &[T]) -> Vec<Option<T>> {
            std::iter::once(None)
                .chain(all.iter().copied().map(Some))
                .collect()
        }
        let mut out = Vec::new();
        for stage in opts(&Stage::ALL) {
            for grade in opts(&Grade::ALL) {
                for extent in opts(&Extent::ALL) {
                    out.push(DiagnosisRecord::periodontitis(stage, grade, extent));
                }
            }
        }
        for extent in opts(&Extent::ALL) {
            for subtype in opts(&Subtype::ALL) {
                out.push(DiagnosisRecord::gingivitis(extent, subtype));
            }
        }
        for subtype in opts(&Subtype::ALL) {
            out.push(DiagnosisRecord::health(subtype));
        }
        out
    }
}

/// Collects every invariant violation of `r`.
pub fn validate_record(r: &DiagnosisRecord) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let s = r.status;
    match s {
        PeriodontalStatus::Periodontitis => {
            if r.subtype.is_some() {
                violations.push(Violation::SubtypeNotPermitted(s));
            }
        }
        PeriodontalStatus::Gingivitis => {
            if r.stage.is_some() {
                violations.push(Violation::StageNotPermitted(s));
            }
            if r.grade.is_some() {
                violations.push(Violation::GradeNotPermitted(s));
            }
        }
        PeriodontalStatus::Health => {
            if r.stage.is_some() {
                violations.push(Violation::StageNotPermitted(s));
            }
            if r.grade.is_some() {
                violations.push(Violation::GradeNotPermitted(s));
            }
            if r.extent.is_some() {
                violations.push(Violation::ExtentNotPermitted(s));
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// A labeled half-open `[start, end)` range of characters in a note.
///
/// Offsets count Unicode scalar values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EntitySpan {
    pub value: EntityValue,
    pub raw_text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpanError {
    #[error("span [{start}, {end}) is empty or inverted")]
    Empty { start: usize, end: usize },
    #[error("span [{start}, {end}) exceeds text length {len}")]
    OutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("span [{start}, {end}) raw text {raw:?} does not match note text {actual:?}")]
    Mismatch {
        start: usize,
        end: usize,
        raw: String,
        actual: String,
    },
    #[error("spans [{0}, {1}) and [{2}, {3}) overlap")]
    Overlap(usize, usize, usize, usize),
}

impl EntitySpan {
    pub fn dimension(&self) -> Dimension {
        self.value.dimension()
    }

    /// Checks bounds and that `raw_text` is the covered substring.
    pub fn check(&self, text: &str) -> Result<(), SpanError> {
        let (start, end) = (self.start, self.end);
        if start >= end {
            return Err(SpanError::Empty { start, end });
        }
        let len = text.chars().count();
        if end > len {
            return Err(SpanError::OutOfBounds { start, end, len });
        }
        let actual = char_slice(text, start, end);
        if actual != self.raw_text {
            return Err(SpanError::Mismatch {
                start,
                end,
                raw: self.raw_text.clone(),
                actual: actual.to_string(),
            });
        }
        Ok(())
    }
}

/// Validates every span against `text` and checks that no two overlap.
pub fn check_spans(text: &str, spans: &[EntitySpan]) -> Result<(), SpanError> {
    for s in spans {
        s.check(text)?;
    }
    let mut ranges: Vec<(usize, usize)> = spans.iter().map(|s| (s.start, s.end)).collect();
    ranges.sort_unstable();
    for w in ranges.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(SpanError::Overlap(w[0].0, w[0].1, w[1].0, w[1].1));
        }
    }
    Ok(())
}

/// Substring by character offsets. Offsets past the end are clamped.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut idx = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()));
    let b_start = idx.by_ref().nth(start).unwrap_or(text.len());
    let b_end = if end > start {
        idx.nth(end - start - 1).unwrap_or(text.len())
    } else {
        b_start
    };
    &text[b_start..b_end]
}
