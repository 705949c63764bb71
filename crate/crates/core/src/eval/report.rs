use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::auc::roc_auc;
use crate::data::Manifest;
use crate::domain::NO_FINDING;
use crate::error::{Error, Result};
use crate::inference::ZeroShotResult;

const MACRO_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucRow {
    pub pathology: String,
    /// `None` when the class had a single label value in the evaluated set.
    pub auc: Option<f64>,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetadata {
    pub dataset_hash: Option<String>,
    pub checkpoint_hashes: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub config: Option<serde_json::Value>,
    pub macro_with_no_finding: Option<f64>,
    pub macro_without_no_finding: Option<f64>,
    /// Values copied from an external source rather than computed.
    pub transcribed: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub profile: String,
    pub rows: Vec<AucRow>,
    /// Mean AUC over rows with a defined AUC.
    pub macro_auc: Option<f64>,
    pub warnings: Vec<String>,
    pub metadata: EvalMetadata,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl EvalReport {
    /// Builds a report from rows, filling in the macro averages.
    pub fn from_rows(profile: impl Into<String>, rows: Vec<AucRow>, warnings: Vec<String>) -> Self {
        let macro_auc = mean(rows.iter().filter_map(|r| r.auc));
        let without = mean(rows.iter().filter(|r| r.pathology != NO_FINDING).filter_map(|r| r.auc));
        Self {
            profile: profile.into(),
            rows,
            macro_auc,
            warnings,
            metadata: EvalMetadata {
                macro_with_no_finding: macro_auc,
                macro_without_no_finding: without,
                ..EvalMetadata::default()
            },
        }
    }

    pub fn auc(&self, pathology: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.pathology == pathology).and_then(|r| r.auc)
    }

    /// Every AUC lies in [0, 1] and, unless transcribed, the macro is the
    /// mean of the defined rows.
    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            if let Some(a) = r.auc {
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::Contract(format!("AUC {a} for `{}` outside [0, 1]", r.pathology)));
                }
            }
        }
        if !self.metadata.transcribed {
            let expected = mean(self.rows.iter().filter_map(|r| r.auc));
            let ok = match (expected, self.macro_auc) {
                (Some(e), Some(m)) => (e - m).abs() <= MACRO_TOLERANCE,
                (None, None) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::Contract(format!(
                    "macro AUC {:?} is not the mean of the rows ({expected:?})",
                    self.macro_auc
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        r.validate()?;
        Ok(r)
    }
}

/// Per-pathology ROC-AUC of `results` against the labels in `truth`.
///
/// Classes whose ground truth is single-valued over the scored images are
/// reported without an AUC, excluded from the macro and named in a warning.
pub fn evaluate(results: &ZeroShotResult, truth: &Manifest) -> Result<EvalReport> {
    let by_id: HashMap<&str, usize> = truth.rows.iter().enumerate().map(|(i, r)| (r.path.as_str(), i)).collect();
    let missing: Vec<String> = results.ids.iter().filter(|id| !by_id.contains_key(id.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing));
    }
    let rows_idx: Vec<usize> = results.ids.iter().map(|id| by_id[id.as_str()]).collect();
    let mut rows = Vec::with_capacity(results.pathologies.len());
    let mut warnings = Vec::new();
    for (j, p) in results.pathologies.iter().enumerate() {
        let idx = truth
            .set
            .index_of(p)
            .ok_or_else(|| Error::UnknownLabel(p.clone()))?;
        let labels: Vec<bool> = rows_idx.iter().map(|&i| truth.rows[i].labels.is_set(idx)).collect();
        let positives = labels.iter().filter(|&&l| l).count();
        let auc = match roc_auc(&results.column(j), &labels) {
            Ok(a) => Some(a),
            Err(Error::UndefinedMetric(_)) => {
                let msg = format!(
                    "`{p}` excluded from the macro average: {positives} positives, {} negatives",
                    labels.len() - positives
                );
                log::warn!("{msg}");
                warnings.push(msg);
                None
            }
            Err(e) => return Err(e),
        };
        rows.push(AucRow {
            pathology: p.clone(),
            auc,
            positives,
            negatives: labels.len() - positives,
        });
    }
    Ok(EvalReport::from_rows(truth.set.profile(), rows, warnings))
}
