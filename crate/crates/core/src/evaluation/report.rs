//! Table-style reports and chart data.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Value};

use super::curve::LearningCurve;
use super::metrics::{label_name, Averages, MetricsTable, Prf};
use crate::model::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "text-table" | "table" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!(
                "unsupported report format {other:?} (expected text, csv or json)"
            )),
        }
    }
}

/// Renders a report; `format` is parsed with [`ReportFormat::from_str`].
pub fn render_report(tables: &[MetricsTable], format: &str) -> Result<String, String> {
    Ok(render(tables, format.parse()?))
}

pub fn render(tables: &[MetricsTable], format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(tables),
        ReportFormat::Csv => render_csv(tables),
        ReportFormat::Json => serde_json::to_string_pretty(&report_json(tables)).unwrap() + "\n",
    }
}

fn averages_of(t: &MetricsTable, d: Dimension) -> Option<Averages> {
    t.dimension(d).and_then(|m| m.averages)
}

const LABEL_W: usize = 20;
const SUB_W: usize = 10;
const COL_W: usize = 10;

fn render_text(tables: &[MetricsTable]) -> String {
    let mut lines = Vec::new();
    let group_w = COL_W * tables.len().max(1);
    let mut line = format!("{:LABEL_W$}{:SUB_W$}", "", "");
    for name in ["Precision", "Recall", "F1-score"] {
        let _ = write!(line, "{name:group_w$}");
    }
    lines.push(line);
    let mut line = format!("{:LABEL_W$}{:SUB_W$}", "", "");
    for _ in 0..3 {
        for t in tables {
            let _ = write!(line, "{:COL_W$}", t.site);
        }
    }
    lines.push(line);
    if !tables.is_empty() {
        for d in Dimension::ALL {
            for (i, avg) in ["Macro", "Weighted"].iter().enumerate() {
                let label = if i == 0 { d.label() } else { "" };
                let mut line = format!("{label:LABEL_W$}{avg:SUB_W$}");
                for metric in 0..3 {
                    for t in tables {
                        let cell = averages_of(t, d).map_or_else(
                            || "-".to_string(),
                            |a| {
                                let prf = if i == 0 { a.macro_avg } else { a.weighted };
                                format!("{:.2}", [prf.p, prf.r, prf.f1][metric])
                            },
                        );
                        let _ = write!(line, "{cell:COL_W$}");
                    }
                }
                lines.push(line);
            }
        }
    }
    lines
        .iter()
        .map(|l| format!("{}\n", l.trim_end()))
        .collect()
}

fn render_csv(tables: &[MetricsTable]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(["dimension", "average", "site", "precision", "recall", "f1"])
        .unwrap();
    for d in Dimension::ALL {
        for avg in ["macro", "weighted"] {
            for t in tables {
                let prf = averages_of(t, d).map(|a| {
                    if avg == "macro" {
                        a.macro_avg
                    } else {
                        a.weighted
                    }
                });
                let nums = prf.map_or_else(
                    || [String::new(), String::new(), String::new()],
                    |p| [p.p.to_string(), p.r.to_string(), p.f1.to_string()],
                );
                w.write_record([d.label(), avg, &t.site, &nums[0], &nums[1], &nums[2]])
                    .unwrap();
            }
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn prf_json(p: Option<Prf>) -> Value {
    p.map_or(Value::Null, |p| json!({"p": p.p, "r": p.r, "f1": p.f1}))
}

/// One object per (site, dimension).
pub fn report_json(tables: &[MetricsTable]) -> Value {
    let mut rows = Vec::new();
    for t in tables {
        for m in &t.dimensions {
            let classes: Vec<Value> = m
                .classes
                .iter()
                .map(|c| {
                    json!({
                        "class": c.class.canonical(),
                        "tp": c.tp, "fp": c.fp, "fn": c.fn_,
                        "precision": c.precision, "recall": c.recall, "f1": c.f1,
                        "support": c.support,
                    })
                })
                .collect();
            rows.push(json!({
                "site": t.site,
                "dimension": m.dimension.label(),
                "notes": t.notes,
                "classes": classes,
                "macro": prf_json(m.averages.map(|a| a.macro_avg)),
                "weighted": prf_json(m.averages.map(|a| a.weighted)),
            }));
        }
    }
    Value::Array(rows)
}

/// Grouped bar chart data: dimensions as groups, one series per site and
/// metric, weighted averages.
pub fn bar_chart_json(tables: &[MetricsTable]) -> Value {
    let groups: Vec<&str> = Dimension::ALL.iter().map(|d| d.label()).collect();
    let mut series = Vec::new();
    for t in tables {
        for (name, pick) in [
            ("precision", (|p: Prf| p.p) as fn(Prf) -> f64),
            ("recall", |p: Prf| p.r),
            ("f1", |p: Prf| p.f1),
        ] {
            let values: Vec<Value> = Dimension::ALL
                .iter()
                .map(|&d| averages_of(t, d).map_or(Value::Null, |a| json!(pick(a.weighted))))
                .collect();
            series.push(json!({"site": t.site, "metric": name, "values": values}));
        }
    }
    json!({"chart": "grouped_bar", "average": "weighted", "groups": groups, "series": series})
}

/// Confusion matrix grids, gold classes as rows.
pub fn confusion_json(tables: &[MetricsTable]) -> Value {
    let mut out = Vec::new();
    for t in tables {
        for m in &t.dimensions {
            let labels: Vec<&str> = m.matrix.classes.iter().map(|&c| label_name(c)).collect();
            out.push(json!({
                "chart": "confusion_matrix",
                "site": t.site,
                "dimension": m.dimension.label(),
                "labels": labels,
                "cells": m.matrix.cells,
            }));
        }
    }
    Value::Array(out)
}

pub fn curve_json(curve: &LearningCurve) -> Value {
    let dims: Vec<&str> = Dimension::ALL.iter().map(|d| d.label()).collect();
    json!({
        "chart": "line",
        "step": curve.step,
        "focus": curve.focus.label(),
        "dimensions": dims,
        "sizes": curve.points.iter().map(|p| p.size).collect::<Vec<_>>(),
        "weighted_f1": curve.points.iter().map(|p| p.weighted_f1.to_vec()).collect::<Vec<_>>(),
        "stabilization_size": curve.stabilization_size,
    })
}
