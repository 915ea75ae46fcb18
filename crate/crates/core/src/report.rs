//! Human-readable tables and `key=value` records for filter and evaluation
//! results.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::eval::EvaluationReport;
use crate::filter::{AnchorTally, Stage};
use crate::model::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryStats {
    pub location_updates: usize,
    pub unique_cells: usize,
    pub highest_cell_frequency: usize,
}

pub fn trajectory_stats(t: &Trajectory) -> TrajectoryStats {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for e in t.events() {
        *freq.entry(e.cell_id.as_str()).or_default() += 1;
    }
    TrajectoryStats {
        location_updates: t.len(),
        unique_cells: freq.len(),
        highest_cell_frequency: freq.values().copied().max().unwrap_or(0),
    }
}

/// Ordered `key=value` records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Records(Vec<(String, String)>);

impl Records {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Parses the output of [`Records::render`]. Blank lines and lines starting
/// with `#` are ignored.
pub fn parse_records(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn stage_key(stage: Stage) -> String {
    match stage {
        Stage::FirstEvent => "first".into(),
        Stage::Anchor(n) => format!("anchor{n}"),
    }
}

pub fn filter_text(
    original: &TrajectoryStats,
    filtered: &TrajectoryStats,
    tally: &AnchorTally,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24}{:>10}{:>10}", "", "Original", "Filtered");
    for (label, a, b) in [
        (
            "Location updates",
            original.location_updates,
            filtered.location_updates,
        ),
        ("Unique cells", original.unique_cells, filtered.unique_cells),
        (
            "Highest cell frequency",
            original.highest_cell_frequency,
            filtered.highest_cell_frequency,
        ),
    ] {
        let _ = writeln!(out, "{label:<24}{a:>10}{b:>10}");
    }
    out.push('\n');
    let _ = writeln!(out, "{:<8}{:>10}{:>11}", "Anchor", "Accepted", "Discarded");
    for (stage, c) in tally.rows() {
        let _ = writeln!(
            out,
            "{:<8}{:>10}{:>11}",
            stage.to_string(),
            c.accepted,
            c.discarded
        );
    }
    let _ = writeln!(
        out,
        "{:<8}{:>10}{:>11}",
        "total",
        tally.accepted(),
        tally.discarded()
    );
    out
}

pub fn filter_records(
    original: &TrajectoryStats,
    filtered: &TrajectoryStats,
    tally: &AnchorTally,
) -> Records {
    let mut r = Records::default();
    for (name, s) in [("original", original), ("filtered", filtered)] {
        r.push(format!("stats.{name}.location_updates"), s.location_updates);
        r.push(format!("stats.{name}.unique_cells"), s.unique_cells);
        r.push(
            format!("stats.{name}.highest_cell_frequency"),
            s.highest_cell_frequency,
        );
    }
    for (stage, c) in tally.rows() {
        let key = stage_key(stage);
        r.push(format!("tally.{key}.accepted"), c.accepted);
        r.push(format!("tally.{key}.discarded"), c.discarded);
    }
    r.push("tally.accepted", tally.accepted());
    r.push("tally.discarded", tally.discarded());
    r.push("tally.total", tally.total());
    r
}

/// Extra event-level counts shown alongside the cell-level evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationContext {
    pub radius_factor: f64,
    pub truth_events: usize,
    pub filter_events: usize,
}

fn ratio_text(value: f64, defined: bool) -> String {
    if defined {
        format!("{value:.3}")
    } else {
        "undefined".into()
    }
}

pub fn evaluation_text(ctx: &EvaluationContext, report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22}{:>10}",
        "Ground truth factor",
        format!("{}", ctx.radius_factor)
    );
    let rows: [(&str, String); 9] = [
        ("Unique GT events", ctx.truth_events.to_string()),
        ("Unique Filter events", ctx.filter_events.to_string()),
        ("Unique GT cells", report.truth_cells.len().to_string()),
        ("Unique Filter cells", report.filter_cells.len().to_string()),
        ("Matching cells", report.matching.len().to_string()),
        ("Not in GT cells", report.not_in_truth.len().to_string()),
        (
            "Not in Filter cells",
            report.not_in_filter.len().to_string(),
        ),
        (
            "Precision",
            ratio_text(report.precision, report.precision_defined),
        ),
        ("Recall", ratio_text(report.recall, report.recall_defined)),
    ];
    for (label, value) in rows {
        let _ = writeln!(out, "{label:<22}{value:>10}");
    }
    out
}

pub fn evaluation_records(ctx: &EvaluationContext, report: &EvaluationReport) -> Records {
    let mut r = Records::default();
    r.push("radius_factor", ctx.radius_factor);
    r.push("gt_events", ctx.truth_events);
    r.push("filter_events", ctx.filter_events);
    r.push("gt_cells", report.truth_cells.len());
    r.push("filter_cells", report.filter_cells.len());
    r.push("matching_cells", report.matching.len());
    r.push("not_in_gt_cells", report.not_in_truth.len());
    r.push("not_in_filter_cells", report.not_in_filter.len());
    r.push("precision", report.precision);
    r.push("recall", report.recall);
    r.push("precision_defined", report.precision_defined);
    r.push("recall_defined", report.recall_defined);
    r
}
