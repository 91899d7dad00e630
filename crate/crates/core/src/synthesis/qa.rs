//! Cross-checks embedded labels against the extractor's reading of the text.

use serde::{Deserialize, Serialize};

use crate::corpus::AnnotatedNote;
use crate::extraction::Extractor;
use crate::model::{DiagnosisRecord, Dimension, EntityValue};
use crate::normalization::record_from_spans;

/// One disagreeing dimension. `None` stands for a blank value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub dimension: Dimension,
    pub embedded: Option<EntityValue>,
    pub extracted: Option<EntityValue>,
    /// Value the text supports; blank when the text does not state one.
    pub proposed: Option<EntityValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum QaVerdict {
    Consistent,
    Discrepant { discrepancies: Vec<Discrepancy> },
}

impl QaVerdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, QaVerdict::Consistent)
    }
}

fn compare(
    embedded: Option<&DiagnosisRecord>,
    extracted: Option<&DiagnosisRecord>,
) -> Vec<Discrepancy> {
    if embedded.is_none() && extracted.is_none() {
        return vec![Discrepancy {
            dimension: Dimension::Status,
            embedded: None,
            extracted: None,
            proposed: None,
        }];
    }
    Dimension::ALL
        .iter()
        .filter_map(|&d| {
            let e = embedded.and_then(|r| r.get(d));
            let x = extracted.and_then(|r| r.get(d));
            (e != x).then_some(Discrepancy {
                dimension: d,
                embedded: e,
                extracted: x,
                proposed: x,
            })
        })
        .collect()
}

/// Compares the note's embedded record with the record the extractor reads
/// from its text. A missing embedded record (unparseable trailer) always
/// yields discrepancies.
pub fn validate_labels(note: &AnnotatedNote, extractor: &dyn Extractor) -> QaVerdict {
    let spans = extractor.extract(note.text());
    let extracted = record_from_spans(note.text(), &spans);
    let discrepancies = compare(note.record.as_ref(), extracted.as_ref());
    if discrepancies.is_empty() {
        QaVerdict::Consistent
    } else {
        QaVerdict::Discrepant { discrepancies }
    }
}

/// The record after accepting every proposal, or `None` when the text
/// supports no diagnosis at all.
pub fn apply_corrections(
    record: Option<&DiagnosisRecord>,
    verdict: &QaVerdict,
) -> Option<DiagnosisRecord> {
    let discrepancies = match verdict {
        QaVerdict::Consistent => return record.copied(),
        QaVerdict::Discrepant { discrepancies } => discrepancies,
    };
    let proposal = |d: Dimension| {
        discrepancies
            .iter()
            .find(|x| x.dimension == d)
            .map_or_else(|| record.and_then(|r| r.get(d)), |x| x.proposed)
    };
    let status = match proposal(Dimension::Status)? {
        EntityValue::Status(s) => s,
        _ => return None,
    };
    let mut out = DiagnosisRecord::new(status);
    for d in [
        Dimension::Stage,
        Dimension::Grade,
        Dimension::Extent,
        Dimension::Subtype,
    ] {
        match proposal(d) {
            Some(EntityValue::Stage(v)) => out.stage = Some(v),
            Some(EntityValue::Grade(v)) => out.grade = Some(v),
            Some(EntityValue::Extent(v)) => out.extent = Some(v),
            Some(EntityValue::Subtype(v)) => out.subtype = Some(v),
            _ => {}
        }
    }
    Some(out.restricted())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QaSummary {
    pub consistent: usize,
    pub corrected: usize,
    pub failed: usize,
}

/// Runs label QA over `notes` in place, storing each verdict.
///
/// Notes without spans receive the extractor's spans. With `auto_fix`,
/// discrepant notes take the corrected record and extracted spans; notes
/// whose text yields no diagnosis still count as failed.
pub fn run_qa(notes: &mut [AnnotatedNote], extractor: &dyn Extractor, auto_fix: bool) -> QaSummary {
    let mut summary = QaSummary::default();
    for note in notes.iter_mut() {
        let verdict = validate_labels(note, extractor);
        match &verdict {
            QaVerdict::Consistent => {
                summary.consistent += 1;
                if note.spans.is_empty() {
                    note.spans = extractor.extract(note.text());
                }
            }
            QaVerdict::Discrepant { .. } if auto_fix => {
                match apply_corrections(note.record.as_ref(), &verdict) {
                    Some(r) => {
                        summary.corrected += 1;
                        note.record = Some(r);
                        note.spans = extractor.extract(note.text());
                    }
                    None => summary.failed += 1,
                }
            }
            QaVerdict::Discrepant { .. } => summary.failed += 1,
        }
        note.qa = Some(verdict);
    }
    summary
}
