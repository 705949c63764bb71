//! Transcribed reference tables shipped as fixtures for the renderer.

use serde::{Deserialize, Serialize};

use super::report::{AucRow, EvalMetadata, EvalReport};
use super::table::{ComparisonTable, Highlight, TableRow};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    PerPathology,
    Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRow {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTable {
    pub title: String,
    pub profile: String,
    pub kind: ReferenceKind,
    pub columns: Vec<String>,
    pub rows: Vec<ReferenceRow>,
    #[serde(default)]
    pub summary_label: Option<String>,
    #[serde(default)]
    pub summary: Option<Vec<f64>>,
}

pub const REFERENCE_NAMES: [&str; 4] = ["nih-zero-shot", "chexpert-zero-shot", "batch-size", "loss-configs"];

/// Pathology rows of the batch-size comparison.
pub const BATCH_TABLE_PATHOLOGIES: [&str; 6] =
    ["Pneumothorax", "Edema", "Fibrosis", "Effusion", "Pneumonia", "Cardiomegaly"];

impl ReferenceTable {
    pub fn parse(text: &str) -> Result<Self> {
        let t: Self = toml::from_str(text)?;
        let width = t.columns.len();
        if t.rows.iter().any(|r| r.values.len() != width) || t.summary.as_ref().is_some_and(|s| s.len() != width) {
            return Err(Error::Config(format!("reference table `{}` has ragged rows", t.title)));
        }
        Ok(t)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "nih-zero-shot" => include_str!("../../assets/reference/nih_zero_shot.toml"),
            "chexpert-zero-shot" => include_str!("../../assets/reference/chexpert_zero_shot.toml"),
            "batch-size" => include_str!("../../assets/reference/batch_size.toml"),
            "loss-configs" => include_str!("../../assets/reference/loss_configs.toml"),
            other => {
                return Err(Error::Config(format!(
                    "unknown reference table `{other}` (expected one of: {})",
                    REFERENCE_NAMES.join(", ")
                )))
            }
        };
        Self::parse(text)
    }

    /// One transcribed report per column; the printed summary is kept as
    /// the macro value.
    pub fn to_reports(&self) -> Result<Vec<EvalReport>> {
        if self.kind != ReferenceKind::PerPathology {
            return Err(Error::Config(format!("`{}` is not a per-pathology table", self.title)));
        }
        Ok((0..self.columns.len())
            .map(|c| {
                let rows = self
                    .rows
                    .iter()
                    .map(|r| AucRow {
                        pathology: r.label.clone(),
                        auc: Some(r.values[c]),
                        positives: 0,
                        negatives: 0,
                    })
                    .collect();
                let mut report = EvalReport::from_rows(self.profile.clone(), rows, Vec::new());
                report.macro_auc = self.summary.as_ref().map(|s| s[c]);
                report.metadata = EvalMetadata {
                    transcribed: true,
                    note: Some(format!("{}: {}", self.title, self.columns[c])),
                    ..EvalMetadata::default()
                };
                report
            })
            .collect())
    }

    pub fn to_table(&self) -> ComparisonTable {
        let row = |label: &str, values: &[f64]| TableRow {
            label: label.to_string(),
            values: values.iter().map(|v| Some(*v)).collect(),
        };
        ComparisonTable {
            title: self.title.clone(),
            row_header: match self.kind {
                ReferenceKind::PerPathology => "Pathology".into(),
                ReferenceKind::Summary => "Loss configuration".into(),
            },
            columns: self.columns.clone(),
            rows: self.rows.iter().map(|r| row(&r.label, &r.values)).collect(),
            summary: self
                .summary
                .as_ref()
                .map(|s| row(self.summary_label.as_deref().unwrap_or("Average"), s)),
            highlight: match self.kind {
                ReferenceKind::PerPathology => Highlight::Row,
                ReferenceKind::Summary => Highlight::Column,
            },
        }
    }
}
