//! Learning curve over growing gold-set prefixes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{align, score_records, EvalError};
use crate::corpus::AnnotatedNote;
use crate::model::{DiagnosisRecord, Dimension};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub step: usize,
    pub epsilon: f64,
    pub window: usize,
    pub seed: u64,
    /// Dimension whose weighted F1 decides stabilization.
    pub focus: Dimension,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams {
            step: 30,
            epsilon: 0.01,
            window: 2,
            seed: 0,
            focus: Dimension::Status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    /// Weighted F1 in `Dimension::ALL` order; `None` when the prefix has no
    /// gold value for that dimension.
    pub weighted_f1: [Option<f64>; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub step: usize,
    pub focus: Dimension,
    pub points: Vec<CurvePoint>,
    pub stabilization_size: Option<usize>,
}

/// Smallest size `s_i` such that the `window` consecutive deltas starting at
/// it, `|f(s_{j+1}) - f(s_j)|` for `j = i..i+window`, are all below
/// `epsilon`.
pub fn detect_stabilization(points: &[(usize, f64)], epsilon: f64, window: usize) -> Option<usize> {
    if window == 0 {
        return points.first().map(|p| p.0);
    }
    let deltas: Vec<f64> = points.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    deltas
        .windows(window)
        .position(|ds| ds.iter().all(|&d| d < epsilon))
        .map(|i| points[i].0)
}

/// Scores prefixes of sizes `step, 2*step, ...` of a seeded shuffle of the
/// aligned pool. A trailing remainder shorter than `step` is not scored.
pub fn learning_curve(
    gold: &[AnnotatedNote],
    pred: &[AnnotatedNote],
    params: &CurveParams,
) -> Result<LearningCurve, EvalError> {
    if params.step == 0 {
        return Err(EvalError::Parameters("step must be positive".into()));
    }
    if params.epsilon.is_nan() || params.epsilon <= 0.0 {
        return Err(EvalError::Parameters("epsilon must be positive".into()));
    }
    let mut pairs: Vec<(Option<DiagnosisRecord>, Option<DiagnosisRecord>)> = align(gold, pred)?
        .into_iter()
        .map(|(g, p)| (g.record, p.record))
        .collect();
    if pairs.len() < params.step {
        return Err(EvalError::PoolTooSmall {
            pool: pairs.len(),
            step: params.step,
        });
    }
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let points: Vec<CurvePoint> = (1..=pairs.len() / params.step)
        .map(|k| {
            let size = k * params.step;
            let table = score_records("", &pairs[..size]);
            CurvePoint {
                size,
                weighted_f1: Dimension::ALL.map(|d| table.weighted_f1(d)),
            }
        })
        .collect();
    let fi = Dimension::ALL
        .iter()
        .position(|&d| d == params.focus)
        .unwrap();
    let series: Vec<(usize, f64)> = points
        .iter()
        .map(|p| (p.size, p.weighted_f1[fi].unwrap_or(0.0)))
        .collect();
    Ok(LearningCurve {
        step: params.step,
        focus: params.focus,
        stabilization_size: detect_stabilization(&series, params.epsilon, params.window),
        points,
    })
}
