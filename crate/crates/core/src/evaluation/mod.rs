//! Scoring predictions against gold: confusion matrices, P/R/F1, learning
//! curves and reports.

mod curve;
mod metrics;
mod report;

pub use curve::{detect_stabilization, learning_curve, CurveParams, CurvePoint, LearningCurve};
pub use metrics::{
    align, averages, build_confusion, class_metrics, compare_note, evaluate, label_name,
    score_records, Averages, ClassMetrics, ConfusionMatrix, DimensionMetrics, EvalError, Label,
    MetricsTable, Prf,
};
pub use report::{
    bar_chart_json, confusion_json, curve_json, render, render_report, report_json, ReportFormat,
};
