//! Result tables in CSV and aligned plain text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, Manifest};
use crate::cwe::Cwe;
use crate::extraction::{CweHierarchy, Prediction};
use crate::metrics::{
    self, mcnemar_exact, BootstrapConfig, ConfusionMatrix, CweRow, McNemarResult, Metric,
    MetricSet, MetricsError,
};
use crate::orchestrator::{CostReport, Mode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, headers: &[&str]) -> Self {
        Table {
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                // First column left-aligned, the rest right-aligned.
                if i == 0 {
                    let _ = write!(s, "{cell:<w$}");
                } else {
                    let _ = write!(s, "{cell:>w$}");
                }
            }
            s.trim_end().to_string()
        };
        let mut out = format!("{}\n", self.title);
        out.push_str(&line(&self.headers));
        out.push('\n');
        let total: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

pub fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

pub fn fmt_ci(ci: Option<&(f64, f64)>) -> String {
    ci.map(|(lo, hi)| format!("({lo:.3}, {hi:.3})"))
        .unwrap_or_default()
}

pub fn fmt_pct(x: Option<f64>) -> String {
    x.map(|v| format!("{:.0}%", 100.0 * v))
        .unwrap_or_else(|| "n/a".into())
}

pub fn fmt_p(p: f64) -> String {
    if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.3}")
    }
}

/// Everything the tables need about one evaluated system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemEvaluation {
    pub name: String,
    #[serde(default)]
    pub mode: Option<Mode>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub per_cwe: Vec<CweRow>,
    /// Per-sample correctness, for paired tests.
    pub correct: BTreeMap<String, bool>,
    #[serde(default)]
    pub cost: Option<CostReport>,
}

/// Metrics with bootstrap intervals for precision, recall and F1.
pub fn evaluate_system(
    name: &str,
    mode: Option<Mode>,
    predictions: &[Prediction],
    manifest: &Manifest,
    hierarchy: &CweHierarchy,
    bootstrap: &BootstrapConfig,
) -> Result<SystemEvaluation, MetricsError> {
    let joined = metrics::outcomes(predictions, manifest, hierarchy)?;
    let (confusion, mut set) = metrics::evaluate(predictions, manifest, hierarchy)?;
    for m in [Metric::Precision, Metric::Recall, Metric::F1] {
        match metrics::bootstrap_outcomes(m, &joined, bootstrap) {
            Ok(ci) => {
                set.ci.insert(m, (ci.lo, ci.hi));
            }
            Err(e) => log::warn!("{name}: no {m} interval: {e}"),
        }
    }
    let correct = manifest
        .samples()
        .iter()
        .zip(&joined)
        .map(|(s, o)| {
            (
                s.id.clone(),
                o.predicted_vulnerable == (s.label == Label::Vulnerable),
            )
        })
        .collect();
    Ok(SystemEvaluation {
        name: name.to_string(),
        mode,
        confusion,
        metrics: set,
        per_cwe: metrics::per_cwe_breakdown(predictions, manifest)?,
        correct,
        cost: None,
    })
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReportError {
    #[error("{a} and {b} were evaluated on different samples")]
    SampleMismatch { a: String, b: String },
}

/// Exact McNemar test between two evaluated systems.
pub fn compare(a: &SystemEvaluation, b: &SystemEvaluation) -> Result<McNemarResult, ReportError> {
    if a.correct.len() != b.correct.len() || !a.correct.keys().eq(b.correct.keys()) {
        return Err(ReportError::SampleMismatch {
            a: a.name.clone(),
            b: b.name.clone(),
        });
    }
    let (mut only_a, mut only_b) = (0, 0);
    for (x, y) in a.correct.values().zip(b.correct.values()) {
        match (x, y) {
            (true, false) => only_a += 1,
            (false, true) => only_b += 1,
            _ => {}
        }
    }
    Ok(McNemarResult {
        a: a.name.clone(),
        b: b.name.clone(),
        only_a,
        only_b,
        p_value: mcnemar_exact(only_a, only_b),
    })
}

pub fn main_table(systems: &[SystemEvaluation]) -> Table {
    let mut t = Table::new(
        "Main results (95% bootstrap CI)",
        &[
            "Configuration",
            "Precision",
            "Precision CI",
            "Recall",
            "Recall CI",
            "F1",
            "F1 CI",
            "FPR",
            "MCC",
            "CWE match",
        ],
    );
    for s in systems {
        let m = &s.metrics;
        t.push(vec![
            s.name.clone(),
            fmt3(m.precision),
            fmt_ci(m.ci.get(&Metric::Precision)),
            fmt3(m.recall),
            fmt_ci(m.ci.get(&Metric::Recall)),
            fmt3(m.f1),
            fmt_ci(m.ci.get(&Metric::F1)),
            fmt3(m.fpr),
            fmt3(m.mcc),
            m.cwe_match_rate.map(fmt3).unwrap_or_else(|| "n/a".into()),
        ]);
    }
    t
}

pub fn cost_table(systems: &[SystemEvaluation]) -> Table {
    let mut t = Table::new(
        "Cost and latency",
        &[
            "Config",
            "Cost/Sample",
            "Time/Sample (s)",
            "Expert Time/Sample (s)",
            "Total Cost",
        ],
    );
    for s in systems {
        if let Some(c) = &s.cost {
            t.push(vec![
                s.name.clone(),
                format!("${:.4}", c.cost_per_sample),
                format!("{:.1}", c.mean_total_wall_seconds),
                format!("{:.1}", c.mean_expert_wall_seconds),
                format!("${:.3}", c.total_cost_dollars),
            ]);
        }
    }
    t
}

/// Side-by-side metrics for two systems with the McNemar p-value.
pub fn comparison_table(
    title: &str,
    a: &SystemEvaluation,
    b: &SystemEvaluation,
) -> Result<Table, ReportError> {
    let test = compare(a, b)?;
    let mut t = Table::new(title, &["Metric", &a.name, &b.name, "Delta", "McNemar p"]);
    for (i, (label, metric)) in [
        ("Precision", Metric::Precision),
        ("Recall", Metric::Recall),
        ("F1", Metric::F1),
        ("FPR", Metric::Fpr),
        ("MCC", Metric::Mcc),
    ]
    .into_iter()
    .enumerate()
    {
        let (x, y) = (
            a.metrics.get(metric).unwrap_or(0.0),
            b.metrics.get(metric).unwrap_or(0.0),
        );
        t.push(vec![
            label.to_string(),
            fmt3(x),
            fmt3(y),
            format!("{:+.3}", x - y),
            if i == 0 {
                fmt_p(test.p_value)
            } else {
                String::new()
            },
        ]);
    }
    t.push(vec![
        "Discordant (only A / only B)".into(),
        test.only_a.to_string(),
        test.only_b.to_string(),
        String::new(),
        String::new(),
    ]);
    Ok(t)
}

/// Parallel versus serial timing and quality.
pub fn parallel_table(
    parallel: &SystemEvaluation,
    serial: &SystemEvaluation,
) -> Result<Table, ReportError> {
    let test = compare(parallel, serial)?;
    let mut t = Table::new(
        "Parallel vs serial execution",
        &["Metric", "Parallel", "Serial", "Gain"],
    );
    let ratio = |p: f64, s: f64| {
        if p > 0.0 {
            format!("{:.1}x", s / p)
        } else {
            "n/a".into()
        }
    };
    if let (Some(p), Some(s)) = (&parallel.cost, &serial.cost) {
        t.push(vec![
            "Expert Time/Sample (s)".into(),
            format!("{:.2}", p.mean_expert_wall_seconds),
            format!("{:.2}", s.mean_expert_wall_seconds),
            ratio(p.mean_expert_wall_seconds, s.mean_expert_wall_seconds),
        ]);
        t.push(vec![
            "Total Time/Sample (s)".into(),
            format!("{:.2}", p.mean_total_wall_seconds),
            format!("{:.2}", s.mean_total_wall_seconds),
            ratio(p.mean_total_wall_seconds, s.mean_total_wall_seconds),
        ]);
    }
    t.push(vec![
        "F1".into(),
        fmt3(parallel.metrics.f1),
        fmt3(serial.metrics.f1),
        format!("{:+.3}", parallel.metrics.f1 - serial.metrics.f1),
    ]);
    t.push(vec![
        "McNemar p".into(),
        fmt_p(test.p_value),
        String::new(),
        String::new(),
    ]);
    Ok(t)
}

/// Short names for the evaluation CWEs.
pub fn cwe_category(cwe: Cwe) -> &'static str {
    match cwe.id() {
        78 => "Cmd Injection",
        121 => "Stack Overflow",
        122 => "Heap Overflow",
        134 => "Format String",
        190 => "Integer Overflow",
        252 => "Unchecked Return",
        369 => "Divide by Zero",
        400 => "Resource Exhaust",
        401 => "Memory Leak",
        415 => "Double Free",
        416 => "Use After Free",
        457 => "Uninit Variable",
        476 => "NULL Deref",
        789 => "Mem Allocation",
        _ => "",
    }
}

/// Per-CWE rows ordered by FPR, then FP count, then CWE id.
pub fn per_cwe_table(system: &SystemEvaluation) -> Table {
    let mut rows = system.per_cwe.clone();
    rows.sort_by(|a, b| {
        a.fpr
            .unwrap_or(f64::INFINITY)
            .total_cmp(&b.fpr.unwrap_or(f64::INFINITY))
            .then(a.fp.cmp(&b.fp))
            .then(a.cwe.cmp(&b.cwe))
    });
    let mut t = Table::new(
        format!("Per-CWE detection ({})", system.name),
        &["CWE", "Category", "FPR", "TN", "FP", "Recall"],
    );
    for r in rows {
        t.push(vec![
            r.cwe.to_string(),
            cwe_category(r.cwe).to_string(),
            fmt_pct(r.fpr),
            r.tn.to_string(),
            r.fp.to_string(),
            fmt_pct(r.recall),
        ]);
    }
    t
}

pub fn mcnemar_table(tests: &[McNemarResult]) -> Table {
    let mut t = Table::new(
        "Pairwise exact McNemar tests",
        &["A", "B", "Only A correct", "Only B correct", "p"],
    );
    for r in tests {
        t.push(vec![
            r.a.clone(),
            r.b.clone(),
            r.only_a.to_string(),
            r.only_b.to_string(),
            fmt_p(r.p_value),
        ]);
    }
    t
}

/// McNemar results for every unordered pair of systems.
pub fn pairwise(systems: &[SystemEvaluation]) -> Result<Vec<McNemarResult>, ReportError> {
    let mut out = Vec::new();
    for (i, a) in systems.iter().enumerate() {
        for b in &systems[i + 1..] {
            out.push(compare(a, b)?);
        }
    }
    Ok(out)
}

/// Every table that the given systems support. Mode-specific comparisons
/// appear only when both modes are present.
pub fn render_all(systems: &[SystemEvaluation]) -> Result<Vec<(String, Table)>, ReportError> {
    let mut tables = vec![("main_results".to_string(), main_table(systems))];
    if systems.iter().any(|s| s.cost.is_some()) {
        tables.push(("cost".into(), cost_table(systems)));
    }
    let find = |mode| systems.iter().find(|s| s.mode == Some(mode));
    if let (Some(v), Some(nov)) = (find(Mode::ParallelV), find(Mode::ParallelNov)) {
        tables.push((
            "verifier_impact".into(),
            comparison_table("Verifier impact (parallel mode)", v, nov)?,
        ));
    }
    if let (Some(p), Some(s)) = (find(Mode::ParallelV), find(Mode::SerialV)) {
        tables.push(("parallel_vs_serial".into(), parallel_table(p, s)?));
    }
    let focus = find(Mode::ParallelV).or(systems.first());
    if let Some(f) = focus {
        tables.push(("per_cwe".into(), per_cwe_table(f)));
    }
    if systems.len() > 1 {
        tables.push(("mcnemar".into(), mcnemar_table(&pairwise(systems)?)));
    }
    Ok(tables)
}
