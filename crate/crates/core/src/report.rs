//! Renders a [`ComparisonReport`] as JSON, CSV or plain-text tables.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Result, TriageError};
use crate::evaluation::ComparisonReport;
use crate::stats::{FriedmanResult, NemenyiResult, ALPHA};

pub const CSV_HEADER: &str = "fold,algorithm,accuracy,weighted_f1,train_seconds,predict_seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStyle {
    Json,
    Csv,
    Table,
}

impl FromStr for ReportStyle {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportStyle::Json),
            "csv" => Ok(ReportStyle::Csv),
            "table" | "tables" | "text" => Ok(ReportStyle::Table),
            other => Err(TriageError::InvalidSpec(format!("unknown report style {other:?}"))),
        }
    }
}

pub fn render(report: &ComparisonReport, style: ReportStyle) -> Result<String> {
    match style {
        ReportStyle::Json => render_json(report),
        ReportStyle::Csv => Ok(render_csv(report)),
        ReportStyle::Table => Ok(render_tables(report)),
    }
}

pub fn render_json(report: &ComparisonReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn parse_json(text: &str) -> Result<ComparisonReport> {
    serde_json::from_str(text).map_err(|e| TriageError::Parse(format!("report: {e}")))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per fold and algorithm, full precision.
pub fn render_csv(report: &ComparisonReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in report.fold_results() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.fold,
            csv_field(&r.algorithm),
            r.accuracy,
            r.weighted_f1,
            r.train_seconds,
            r.predict_seconds
        );
    }
    out
}

fn fixed4(v: f64) -> String {
    format!("{v:.4}")
}

fn flagged(p: f64) -> String {
    if p < ALPHA {
        format!("{p:.4}*")
    } else {
        format!("{p:.4} ")
    }
}

fn table(title: &str, header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).chain([header[c].chars().count()]).max().unwrap())
        .collect();
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        format!("{}\n", parts.join("  ").trim_end())
    };
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (cols - 1));
    let mut out = format!("{title}\n{rule}\n");
    out.push_str(&line(header));
    out.push_str(&rule);
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
    }
    out.push_str(&rule);
    out.push('\n');
    out
}

/// Pairwise p-value table with entries below the significance level marked `*`.
pub fn render_pairwise(title: &str, names: &[String], friedman: &FriedmanResult, nemenyi: &NemenyiResult) -> String {
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut row = vec![name.clone()];
            row.extend(nemenyi.p_matrix[i].iter().map(|&p| flagged(p)));
            row
        })
        .collect();
    let mut out = table(title, &header, &rows);
    let _ = writeln!(
        out,
        "Friedman Q = {:.4}, p = {:.4}{}; critical difference = {:.4}",
        friedman.q_statistic,
        friedman.p_value,
        if friedman.fully_tied { " (all blocks tied)" } else { "" },
        nemenyi.critical_difference
    );
    let ranks: Vec<String> = names.iter().zip(&friedman.mean_ranks).map(|(n, r)| format!("{n} {r:.2}")).collect();
    let _ = writeln!(out, "Mean ranks (1 = best): {}", ranks.join(", "));
    let _ = writeln!(out, "* p < {ALPHA}");
    out
}

pub fn render_tables(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let rows: Vec<Vec<String>> = report
        .summary
        .iter()
        .map(|s| vec![s.algorithm.clone(), fixed4(s.mean_accuracy), fixed4(s.mean_weighted_f1)])
        .collect();
    out.push_str(&table(
        &format!("Table 1. Mean accuracy and weighted F1 over {} folds", report.k),
        &["Algorithm".into(), "Accuracy".into(), "F1-score".into()],
        &rows,
    ));
    out.push('\n');

    match &report.statistics {
        Some(stats) => {
            out.push_str(&render_pairwise(
                "Table 2. Pairwise Nemenyi p-values for accuracy",
                &report.algorithms,
                &stats.accuracy.friedman,
                &stats.accuracy.nemenyi,
            ));
            out.push('\n');
            out.push_str(&render_pairwise(
                "Table 3. Pairwise Nemenyi p-values for F1-score",
                &report.algorithms,
                &stats.weighted_f1.friedman,
                &stats.weighted_f1.nemenyi,
            ));
        }
        None => out.push_str("Tables 2 and 3 need at least two algorithms.\n"),
    }
    out.push('\n');

    let t = &report.timing;
    let rows: Vec<Vec<String>> = report
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, name)| {
            vec![
                name.clone(),
                fixed4(t.mean_train_seconds[a] / 60.0),
                fixed4(t.mean_train_seconds[a]),
                fixed4(t.mean_predict_seconds[a] / 60.0),
                fixed4(t.mean_predict_seconds[a]),
            ]
        })
        .collect();
    out.push_str(&table(
        "Table 4. Mean training and prediction time per fold",
        &["Algorithm".into(), "Train (min)".into(), "Train (s)".into(), "Predict (min)".into(), "Predict (s)".into()],
        &rows,
    ));
    let _ = writeln!(out, "Environment: {}", t.environment);
    out
}
