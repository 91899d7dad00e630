//! Note-level comparison, confusion matrices and P/R/F1.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::AnnotatedNote;
use crate::model::{DiagnosisRecord, Dimension, EntityValue};

/// A matrix class: a dimension value, or `None` for N/A.
pub type Label = Option<EntityValue>;

pub fn label_name(l: Label) -> &'static str {
    l.map_or("N/A", |v| v.canonical())
}

/// Per-dimension (gold, predicted) pairs in `Dimension::ALL` order.
pub fn compare_note(
    gold: Option<&DiagnosisRecord>,
    pred: Option<&DiagnosisRecord>,
) -> [(Label, Label); 5] {
    Dimension::ALL.map(|d| (gold.and_then(|r| r.get(d)), pred.and_then(|r| r.get(d))))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub dimension: Dimension,
    /// Dimension values in order, then N/A.
    pub classes: Vec<Label>,
    /// `cells[gold][pred]`.
    pub cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn empty(dimension: Dimension) -> Self {
        let mut classes: Vec<Label> = dimension.values().into_iter().map(Some).collect();
        classes.push(None);
        let n = classes.len();
        ConfusionMatrix {
            dimension,
            classes,
            cells: vec![vec![0; n]; n],
        }
    }

    pub fn index(&self, l: Label) -> usize {
        self.classes
            .iter()
            .position(|&c| c == l)
            .expect("label of another dimension")
    }

    pub fn add(&mut self, gold: Label, pred: Label, count: u64) {
        let (g, p) = (self.index(gold), self.index(pred));
        self.cells[g][p] += count;
    }

    pub fn cell(&self, gold: Label, pred: Label) -> u64 {
        self.cells[self.index(gold)][self.index(pred)]
    }

    pub fn row_sum(&self, gold: Label) -> u64 {
        self.cells[self.index(gold)].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }
}

pub fn build_confusion(dimension: Dimension, pairs: &[(Label, Label)]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::empty(dimension);
    for &(g, p) in pairs {
        m.add(g, p, 1);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: EntityValue,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    pub fn from_counts(class: EntityValue, tp: u64, fp: u64, fn_: u64, support: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            class,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            support,
        }
    }
}

pub fn class_metrics(m: &ConfusionMatrix, class: EntityValue) -> ClassMetrics {
    let c = m.index(Some(class));
    let tp = m.cells[c][c];
    let fp = (0..m.classes.len())
        .filter(|&g| g != c)
        .map(|g| m.cells[g][c])
        .sum();
    let fn_ = (0..m.classes.len())
        .filter(|&p| p != c)
        .map(|p| m.cells[c][p])
        .sum();
    let support = m.cells[c].iter().sum();
    ClassMetrics::from_counts(class, tp, fp, fn_, support)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
    pub weighted: Prf,
}

/// Macro and support-weighted means over classes with nonzero support.
/// `None` when no class has support.
pub fn averages(metrics: &[ClassMetrics]) -> Option<Averages> {
    let used: Vec<&ClassMetrics> = metrics.iter().filter(|m| m.support > 0).collect();
    if used.is_empty() {
        return None;
    }
    let n = used.len() as f64;
    let total: u64 = used.iter().map(|m| m.support).sum();
    let mean = |f: fn(&ClassMetrics) -> f64| used.iter().map(|m| f(m)).sum::<f64>() / n;
    let wmean = |f: fn(&ClassMetrics) -> f64| {
        used.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };
    Some(Averages {
        macro_avg: Prf {
            p: mean(|m| m.precision),
            r: mean(|m| m.recall),
            f1: mean(|m| m.f1),
        },
        weighted: Prf {
            p: wmean(|m| m.precision),
            r: wmean(|m| m.recall),
            f1: wmean(|m| m.f1),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionMetrics {
    pub dimension: Dimension,
    pub classes: Vec<ClassMetrics>,
    pub averages: Option<Averages>,
    pub matrix: ConfusionMatrix,
}

impl DimensionMetrics {
    pub fn from_matrix(matrix: ConfusionMatrix) -> Self {
        let classes: Vec<ClassMetrics> = matrix
            .dimension
            .values()
            .into_iter()
            .map(|v| class_metrics(&matrix, v))
            .collect();
        DimensionMetrics {
            dimension: matrix.dimension,
            averages: averages(&classes),
            classes,
            matrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub site: String,
    pub notes: usize,
    pub dimensions: Vec<DimensionMetrics>,
}

impl MetricsTable {
    pub fn dimension(&self, d: Dimension) -> Option<&DimensionMetrics> {
        self.dimensions.iter().find(|m| m.dimension == d)
    }

    pub fn weighted_f1(&self, d: Dimension) -> Option<f64> {
        self.dimension(d)?.averages.map(|a| a.weighted.f1)
    }
}

/// Scores aligned (gold, predicted) record pairs.
pub fn score_records(
    site: &str,
    pairs: &[(Option<DiagnosisRecord>, Option<DiagnosisRecord>)],
) -> MetricsTable {
    let mut matrices = Dimension::ALL.map(ConfusionMatrix::empty);
    for (g, p) in pairs {
        for (m, (gl, pl)) in matrices
            .iter_mut()
            .zip(compare_note(g.as_ref(), p.as_ref()))
        {
            m.add(gl, pl, 1);
        }
    }
    MetricsTable {
        site: site.to_string(),
        notes: pairs.len(),
        dimensions: matrices
            .into_iter()
            .map(DimensionMetrics::from_matrix)
            .collect(),
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold and predictions are not aligned: {}", describe_misalignment(.missing, .unexpected))]
    Misaligned {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
    #[error("pool of {pool} notes is smaller than the step of {step}")]
    PoolTooSmall { pool: usize, step: usize },
    #[error("invalid learning-curve parameters: {0}")]
    Parameters(String),
}

fn describe_misalignment(missing: &[String], unexpected: &[String]) -> String {
    let mut parts = Vec::new();
    if !missing.is_empty() {
        parts.push(format!("no prediction for {}", missing.join(", ")));
    }
    if !unexpected.is_empty() {
        parts.push(format!("no gold note for {}", unexpected.join(", ")));
    }
    parts.join("; ")
}

/// Pairs each gold note with the prediction of the same id, in gold order.
pub fn align<'a>(
    gold: &'a [AnnotatedNote],
    pred: &'a [AnnotatedNote],
) -> Result<Vec<(&'a AnnotatedNote, &'a AnnotatedNote)>, EvalError> {
    let by_id: HashMap<&str, &AnnotatedNote> = pred.iter().map(|n| (n.id(), n)).collect();
    let gold_ids: std::collections::HashSet<&str> = gold.iter().map(|n| n.id()).collect();
    let missing: Vec<String> = gold
        .iter()
        .filter(|n| !by_id.contains_key(n.id()))
        .map(|n| n.id().to_string())
        .collect();
    let unexpected: Vec<String> = pred
        .iter()
        .filter(|n| !gold_ids.contains(n.id()))
        .map(|n| n.id().to_string())
        .collect();
    if !missing.is_empty() || !unexpected.is_empty() {
        return Err(EvalError::Misaligned {
            missing,
            unexpected,
        });
    }
    Ok(gold.iter().map(|g| (g, by_id[g.id()])).collect())
}

/// One table per gold site, in site-name order.
/// Gold and predicted record for one note.
pub type RecordPair = (Option<DiagnosisRecord>, Option<DiagnosisRecord>);

pub fn evaluate(
    gold: &[AnnotatedNote],
    pred: &[AnnotatedNote],
) -> Result<Vec<MetricsTable>, EvalError> {
    let mut sites: BTreeMap<&str, Vec<RecordPair>> = BTreeMap::new();
    for (g, p) in align(gold, pred)? {
        sites
            .entry(g.note.site_id.as_str())
            .or_default()
            .push((g.record, p.record));
    }
    Ok(sites
        .into_iter()
        .map(|(site, pairs)| score_records(site, &pairs))
        .collect())
}
