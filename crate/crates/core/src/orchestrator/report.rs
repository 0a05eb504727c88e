//! Comparison tables: absolute baseline percentages, then signed deltas per
//! method, one column per model.

use serde::{Deserialize, Serialize};

use super::record::{RunRecord, RunStatus};
use crate::eval::{format_delta, format_percent, MetricTriple};
use crate::repair::RepairMethod;

pub const REPORT_SCHEMA: &str = "netrepair-report/1";
pub const BEST_MARKER: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    Acc,
    Const,
    Conf,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Acc, MetricKind::Const, MetricKind::Conf];

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Acc => "Acc.",
            MetricKind::Const => "Const.",
            MetricKind::Conf => "Conf.",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            MetricKind::Acc => "acc",
            MetricKind::Const => "const_acc",
            MetricKind::Conf => "conf_acc",
        }
    }

    pub fn of(self, t: &MetricTriple) -> f64 {
        match self {
            MetricKind::Acc => t.acc,
            MetricKind::Const => t.const_acc,
            MetricKind::Conf => t.conf_acc,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    /// Show the constraint row for weight-patch, which does not target it.
    pub show_all_constraints: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub csv: String,
}

fn shows(method: RepairMethod, kind: MetricKind, opts: &ReportOptions) -> bool {
    !(kind == MetricKind::Const && method == RepairMethod::WeightPatch && !opts.show_all_constraints)
}

fn unique<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// The record whose `kind` delta is largest among successful records of
/// `model`; ties go to the earliest method.
fn best(records: &[RunRecord], model: &str, kind: MetricKind, opts: &ReportOptions) -> Option<usize> {
    let mut winner: Option<(usize, f64)> = None;
    for (i, r) in records.iter().enumerate() {
        let (Some(method), Some(agg)) = (r.method, r.aggregate.as_ref()) else {
            continue;
        };
        if r.model != model || r.status != RunStatus::Ok || !shows(method, kind, opts) {
            continue;
        }
        let d = kind.of(&agg.delta);
        if winner.is_none_or(|(_, w)| d > w) {
            winner = Some((i, d));
        }
    }
    winner.map(|(i, _)| i)
}

/// Renders the records as an aligned text table and a CSV.
///
/// Text: rows `Baseline <metric>` with absolute percentages, then
/// `<method> <metric>` with signed deltas of the repetition means. Per model
/// column the best accuracy delta and the best constraint delta carry
/// [`BEST_MARKER`].
///
/// CSV columns: `schema, model, method, metric, before, after, delta, best,
/// status`, fractions with six decimals.
pub fn render_report(records: &[RunRecord], opts: &ReportOptions) -> Report {
    let models = unique(records.iter().map(|r| r.model.clone()));
    let methods = unique(records.iter().filter_map(|r| r.method));
    let baseline = |m: &str| records.iter().find(|r| r.model == m).map(|r| r.baseline);
    let flagged: Vec<(String, MetricKind, usize)> = models
        .iter()
        .flat_map(|m| {
            [MetricKind::Acc, MetricKind::Const]
                .into_iter()
                .filter_map(move |k| best(records, m, k, opts).map(|i| (m.clone(), k, i)))
        })
        .collect();
    let is_best = |i: usize, kind: MetricKind| flagged.iter().any(|(_, k, j)| *k == kind && *j == i);

    let mut rows: Vec<Vec<String>> = vec![{
        let mut h = vec![String::new()];
        h.extend(models.iter().cloned());
        h
    }];
    for kind in MetricKind::ALL {
        let mut row = vec![format!("Baseline {}", kind.label())];
        for m in &models {
            row.push(baseline(m).map_or("-".into(), |b| format_percent(kind.of(&b))));
        }
        rows.push(row);
    }
    for method in &methods {
        for kind in MetricKind::ALL {
            let mut row = vec![format!("{method} {}", kind.label())];
            for m in &models {
                let hit = records
                    .iter()
                    .enumerate()
                    .find(|(_, r)| r.model == *m && r.method == Some(*method));
                let cell = match hit {
                    None => "-".to_string(),
                    Some(_) if !shows(*method, kind, opts) => "n/a".to_string(),
                    Some((_, r)) if r.status == RunStatus::Failed => "failed".to_string(),
                    Some((i, r)) => match &r.aggregate {
                        None => "-".to_string(),
                        Some(agg) => {
                            let mut c = format_delta(kind.of(&agg.delta));
                            if is_best(i, kind) {
                                c.push_str(BEST_MARKER);
                            }
                            c
                        }
                    },
                };
                row.push(cell);
            }
            rows.push(row);
        }
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for (ri, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| {
                if c == 0 {
                    format!("{v:<w$}", w = widths[c])
                } else {
                    format!("{v:>w$}", w = widths[c])
                }
            })
            .collect();
        text.push_str(cells.join("  ").trim_end());
        text.push('\n');
        if ri == 0 {
            text.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            text.push('\n');
        }
    }
    if !flagged.is_empty() {
        text.push_str(&format!("{BEST_MARKER} best accuracy / constraint delta in its column\n"));
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    let header = ["schema", "model", "method", "metric", "before", "after", "delta", "best", "status"];
    w.write_record(header).expect("in-memory csv");
    let f = |v: f64| format!("{v:.6}");
    for m in &models {
        if let Some(b) = baseline(m) {
            for kind in MetricKind::ALL {
                let v = f(kind.of(&b));
                w.write_record([REPORT_SCHEMA, m, "baseline", kind.key(), &v, &v, &f(0.0), "", "ok"])
                    .expect("in-memory csv");
            }
        }
    }
    for (i, r) in records.iter().enumerate() {
        let Some(method) = r.method else { continue };
        let status = match r.status {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
        };
        for kind in MetricKind::ALL {
            let (before, after, delta) = match &r.aggregate {
                Some(a) => (f(kind.of(&a.before)), f(kind.of(&a.after)), f(kind.of(&a.delta))),
                None => (String::new(), String::new(), String::new()),
            };
            let flag = if is_best(i, kind) { "1" } else { "" };
            w.write_record([REPORT_SCHEMA, &r.model, method.as_str(), kind.key(), &before, &after, &delta, flag, status])
                .expect("in-memory csv");
        }
    }
    let csv = String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv");
    Report { text, csv }
}
