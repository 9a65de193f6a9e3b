//! Rendering of tolerance reports as an aligned text table, TSV or JSON.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlp::SolveStatus;
use crate::pipeline::{ConstraintResult, ToleranceReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    TextTable,
    Tsv,
    JsonDoc,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text-table" => Ok(Self::TextTable),
            "tsv" => Ok(Self::Tsv),
            "json-doc" => Ok(Self::JsonDoc),
            other => Err(format!("unknown format `{other}` (text-table, tsv, json-doc)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn render(report: &ToleranceReport, format: ReportFormat) -> Result<String, ReportError> {
    Ok(match format {
        ReportFormat::TextTable => render_text(report),
        ReportFormat::Tsv => render_tsv(report),
        ReportFormat::JsonDoc => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            s
        }
    })
}

fn fixed4(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn violations(s: Option<&crate::verify::SampleReport>) -> String {
    s.map_or_else(
        || "n/a".to_string(),
        |r| {
            let pct = if r.samples == 0 { 0.0 } else { 100.0 * r.violations as f64 / r.samples as f64 };
            format!("{pct:.4}%")
        },
    )
}

/// One column per constraint plus a combined column when there are several.
pub fn render_text(report: &ToleranceReport) -> String {
    let mut headers: Vec<String> = report.constraints.iter().map(|c| c.name.clone()).collect();
    let mut time: Vec<String> = report.constraints.iter().map(|c| fixed4(c.seconds)).collect();
    let mut viol: Vec<String> = report.constraints.iter().map(|c| violations(c.verification.as_ref())).collect();
    let mut min_f: Vec<String> = report
        .constraints
        .iter()
        .map(|c| fixed4(c.verification.as_ref().map(|v| v.min_f)))
        .collect();
    let mut lambda: Vec<String> = report.constraints.iter().map(|c| fixed4(Some(c.lambda))).collect();
    if report.constraints.len() > 1 {
        headers.push("all".into());
        time.push(fixed4(report.seconds));
        viol.push(violations(report.combined.as_ref()));
        min_f.push(fixed4(report.combined.as_ref().map(|v| v.min_f)));
        lambda.push(fixed4(Some(report.lambda_min)));
    }
    let rows = [
        ("", headers),
        ("time (s)", time),
        ("safety violation", viol),
        ("smallest f(x) (m)", min_f),
        ("λ (rad)", lambda),
    ];
    let label_w = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
    let ncol = rows[0].1.len();
    let col_w: Vec<usize> = (0..ncol)
        .map(|j| rows.iter().map(|(_, r)| r[j].chars().count()).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, "{} ({} DOF, cone order {})", report.name, report.dof, report.cone_order);
    for (label, cells) in &rows {
        let pad = label_w - label.chars().count();
        let _ = write!(out, "{label}{}", " ".repeat(pad));
        for (cell, w) in cells.iter().zip(&col_w) {
            let pad = w - cell.chars().count();
            let _ = write!(out, "  {}{cell}", " ".repeat(pad));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "λ_min = {:.4} rad", report.lambda_min);
    for c in &report.constraints {
        if let Some(e) = &c.error {
            let _ = writeln!(out, "error [{}]: {e}", c.name);
        }
    }
    if !report.warnings.is_empty() {
        out.push_str("warnings:\n");
        for w in &report.warnings {
            let _ = writeln!(out, "  - {w}");
        }
    }
    out
}

const TSV_COLUMNS: [&str; 13] = [
    "constraint",
    "reference_clearance",
    "lambda",
    "status",
    "iterations",
    "backoff_rounds",
    "min_eigenvalue",
    "seconds",
    "samples",
    "violations",
    "min_f",
    "oracle_lambda",
    "model_gap",
];

/// Flat per-constraint record as written to TSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TsvRow {
    pub constraint: String,
    pub reference_clearance: f64,
    pub lambda: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub backoff_rounds: usize,
    pub min_eigenvalue: Option<f64>,
    pub seconds: Option<f64>,
    pub samples: Option<usize>,
    pub violations: Option<usize>,
    pub min_f: Option<f64>,
    pub oracle_lambda: Option<f64>,
    pub model_gap: Option<f64>,
}

impl From<&ConstraintResult> for TsvRow {
    fn from(c: &ConstraintResult) -> Self {
        Self {
            constraint: c.name.clone(),
            reference_clearance: c.reference_clearance,
            lambda: c.lambda,
            status: c.status,
            iterations: c.iterations,
            backoff_rounds: c.backoff_rounds,
            min_eigenvalue: c.min_eigenvalue,
            seconds: c.seconds,
            samples: c.verification.as_ref().map(|v| v.samples),
            violations: c.verification.as_ref().map(|v| v.violations),
            min_f: c.verification.as_ref().map(|v| v.min_f),
            oracle_lambda: c.oracle.map(|o| o.lambda_hat),
            model_gap: c.model_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsvDocument {
    pub name: String,
    pub lambda_min: f64,
    pub rows: Vec<TsvRow>,
}

impl From<&ToleranceReport> for TsvDocument {
    fn from(r: &ToleranceReport) -> Self {
        Self { name: r.name.clone(), lambda_min: r.lambda_min, rows: r.constraints.iter().map(TsvRow::from).collect() }
    }
}

fn status_str(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIter => "max-iter",
        SolveStatus::Infeasible => "infeasible",
    }
}

fn opt<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:?}"))
}

/// Tab-separated values with shortest round-trip float formatting. Two
/// comment lines carry the problem name and the combined bound.
pub fn render_tsv(report: &ToleranceReport) -> String {
    let doc = TsvDocument::from(report);
    let mut out = String::new();
    let _ = writeln!(out, "# name\t{}", doc.name);
    let _ = writeln!(out, "# lambda_min\t{:?}", doc.lambda_min);
    out.push_str(&TSV_COLUMNS.join("\t"));
    out.push('\n');
    for r in &doc.rows {
        let cells = [
            r.constraint.clone(),
            format!("{:?}", r.reference_clearance),
            format!("{:?}", r.lambda),
            status_str(r.status).to_string(),
            r.iterations.to_string(),
            r.backoff_rounds.to_string(),
            opt(r.min_eigenvalue),
            opt(r.seconds),
            opt(r.samples),
            opt(r.violations),
            opt(r.min_f),
            opt(r.oracle_lambda),
            opt(r.model_gap),
        ];
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

fn parse_cell<T: FromStr>(cell: &str, line: usize, col: &str) -> Result<T, ReportError> {
    cell.parse()
        .map_err(|_| ReportError::Parse { line, message: format!("bad value `{cell}` in column `{col}`") })
}

fn parse_opt<T: FromStr>(cell: &str, line: usize, col: &str) -> Result<Option<T>, ReportError> {
    if cell == "n/a" {
        Ok(None)
    } else {
        parse_cell(cell, line, col).map(Some)
    }
}

pub fn parse_tsv(text: &str) -> Result<TsvDocument, ReportError> {
    let mut name = None;
    let mut lambda_min = None;
    let mut header_seen = false;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if let Some(meta) = raw.strip_prefix("# ") {
            let (k, v) = meta
                .split_once('\t')
                .ok_or_else(|| ReportError::Parse { line, message: "malformed comment".into() })?;
            match k {
                "name" => name = Some(v.to_string()),
                "lambda_min" => lambda_min = Some(parse_cell(v, line, k)?),
                _ => {}
            }
            continue;
        }
        let cells: Vec<&str> = raw.split('\t').collect();
        if !header_seen {
            if cells != TSV_COLUMNS {
                return Err(ReportError::Parse { line, message: "unexpected header".into() });
            }
            header_seen = true;
            continue;
        }
        if cells.len() != TSV_COLUMNS.len() {
            return Err(ReportError::Parse {
                line,
                message: format!("expected {} cells, got {}", TSV_COLUMNS.len(), cells.len()),
            });
        }
        let status = match cells[3] {
            "converged" => SolveStatus::Converged,
            "max-iter" => SolveStatus::MaxIter,
            "infeasible" => SolveStatus::Infeasible,
            other => return Err(ReportError::Parse { line, message: format!("unknown status `{other}`") }),
        };
        rows.push(TsvRow {
            constraint: cells[0].to_string(),
            reference_clearance: parse_cell(cells[1], line, TSV_COLUMNS[1])?,
            lambda: parse_cell(cells[2], line, TSV_COLUMNS[2])?,
            status,
            iterations: parse_cell(cells[4], line, TSV_COLUMNS[4])?,
            backoff_rounds: parse_cell(cells[5], line, TSV_COLUMNS[5])?,
            min_eigenvalue: parse_opt(cells[6], line, TSV_COLUMNS[6])?,
            seconds: parse_opt(cells[7], line, TSV_COLUMNS[7])?,
            samples: parse_opt(cells[8], line, TSV_COLUMNS[8])?,
            violations: parse_opt(cells[9], line, TSV_COLUMNS[9])?,
            min_f: parse_opt(cells[10], line, TSV_COLUMNS[10])?,
            oracle_lambda: parse_opt(cells[11], line, TSV_COLUMNS[11])?,
            model_gap: parse_opt(cells[12], line, TSV_COLUMNS[12])?,
        });
    }
    let missing = |what: &str| ReportError::Parse { line: 0, message: format!("missing {what}") };
    if !header_seen {
        return Err(missing("header"));
    }
    Ok(TsvDocument {
        name: name.ok_or_else(|| missing("name"))?,
        lambda_min: lambda_min.ok_or_else(|| missing("lambda_min"))?,
        rows,
    })
}
