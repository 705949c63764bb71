use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::report::EvalReport;
use crate::error::{Error, Result};

pub const BEST_MARK: char = '*';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Highlight {
    /// Best value across the columns of each row.
    Row,
    /// Best value down each column.
    Column,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

/// Row-label × variant grid of AUC values with an optional summary row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub title: String,
    pub row_header: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
    pub summary: Option<TableRow>,
    pub highlight: Highlight,
}

fn best(values: &[Option<f64>]) -> Option<f64> {
    values.iter().flatten().copied().fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
}

fn cell(v: Option<f64>, best: Option<f64>) -> String {
    match v {
        None => "-".to_string(),
        Some(x) if Some(x) == best => format!("{x:.3}{BEST_MARK}"),
        Some(x) => format!("{x:.3}"),
    }
}

impl ComparisonTable {
    /// Plain-text rendering. Best values carry a trailing `*`; the summary
    /// row, when present, comes last below a rule.
    pub fn render(&self) -> String {
        let col_best: Vec<Option<f64>> = (0..self.columns.len())
            .map(|c| best(&self.rows.iter().map(|r| r.values[c]).collect::<Vec<_>>()))
            .collect();
        let render_row = |r: &TableRow, per_column: bool| -> Vec<String> {
            let row_best = best(&r.values);
            let mut out = vec![r.label.clone()];
            for (c, v) in r.values.iter().enumerate() {
                let b = if per_column { col_best[c] } else { row_best };
                out.push(cell(*v, b));
            }
            out
        };
        let per_col = self.highlight == Highlight::Column;
        let mut body: Vec<Vec<String>> = self.rows.iter().map(|r| render_row(r, per_col)).collect();
        let summary = self.summary.as_ref().map(|r| render_row(r, false));
        let mut header = vec![self.row_header.clone()];
        header.extend(self.columns.iter().cloned());

        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for r in body.iter().chain(summary.iter()) {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| -> String {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i == 0 {
                    let _ = write!(s, "{c:<w$}");
                } else {
                    let _ = write!(s, "  {c:>w$}");
                }
            }
            s.trim_end().to_string() + "\n"
        };
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)) + "\n";
        let mut out = format!("{}\n{}", self.title, rule);
        out += &line(&header);
        out += &rule;
        for r in body.drain(..) {
            out += &line(&r);
        }
        if let Some(s) = summary {
            out += &rule;
            out += &line(&s);
        }
        out += &rule;
        out
    }
}

/// Side-by-side per-pathology comparison of reports over one label
/// vocabulary, macro row last.
///
/// Rows follow the first report's order; pathologies only present in later
/// reports are appended.
pub fn compare(reports: &[EvalReport], names: &[String]) -> Result<ComparisonTable> {
    compare_rows(reports, names, None, "Average AUC")
}

/// Like [`compare`], restricted to `only` (in that order) when given. The
/// summary row then averages the displayed rows.
pub fn compare_rows(
    reports: &[EvalReport],
    names: &[String],
    only: Option<&[&str]>,
    summary_label: &str,
) -> Result<ComparisonTable> {
    if reports.is_empty() {
        return Err(Error::Config("nothing to compare".into()));
    }
    if names.len() != reports.len() {
        return Err(Error::Config(format!(
            "{} names for {} reports",
            names.len(),
            reports.len()
        )));
    }
    let profile = &reports[0].profile;
    if let Some(r) = reports.iter().find(|r| &r.profile != profile) {
        return Err(Error::Config(format!(
            "cannot compare reports over different pathology sets (`{profile}` vs `{}`)",
            r.profile
        )));
    }
    let mut labels: Vec<String> = Vec::new();
    for r in reports {
        for row in &r.rows {
            if !labels.contains(&row.pathology) {
                labels.push(row.pathology.clone());
            }
        }
    }
    if let Some(only) = only {
        labels = only.iter().filter(|p| labels.iter().any(|l| l == *p)).map(|p| p.to_string()).collect();
    }
    let rows: Vec<TableRow> = labels
        .iter()
        .map(|l| TableRow {
            label: l.clone(),
            values: reports.iter().map(|r| r.auc(l)).collect(),
        })
        .collect();
    let summary_values = if only.is_some() {
        (0..reports.len())
            .map(|c| {
                let vals: Vec<f64> = rows.iter().filter_map(|r| r.values[c]).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    } else {
        reports.iter().map(|r| r.macro_auc).collect()
    };
    Ok(ComparisonTable {
        title: "AUC by pathology".into(),
        row_header: "Pathology".into(),
        columns: names.to_vec(),
        rows,
        summary: Some(TableRow {
            label: summary_label.into(),
            values: summary_values,
        }),
        highlight: Highlight::Row,
    })
}
