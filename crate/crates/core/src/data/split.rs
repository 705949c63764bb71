use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::Manifest;
use crate::domain::RngState;
use crate::error::{Error, Result};

/// Realized split fractions further than this from the target trigger a
/// warning.
const FRACTION_WARN_GAP: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    /// Keep all rows of one patient in the same split when the manifest
    /// carries patient ids.
    pub group_by_patient: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            seed: 0,
            group_by_patient: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.train, self.val, self.test];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions {:?} must be in [0, 1] and sum to 1",
                fr
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Manifest,
    pub val: Manifest,
    pub test: Manifest,
    /// Whether patient grouping was applied.
    pub grouped: bool,
    pub warnings: Vec<String>,
}

/// Partition `manifest` into train/val/test. Rows keep their manifest order
/// inside each split.
pub fn split(manifest: &Manifest, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let n = manifest.len();
    let grouped = spec.group_by_patient && manifest.rows.iter().any(|r| r.patient.is_some());

    // Units of assignment: patient groups, or single rows.
    let mut units: Vec<Vec<usize>> = if grouped {
        let mut by_key: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in manifest.rows.iter().enumerate() {
            let key = r.patient.clone().unwrap_or_else(|| format!("\u{0}row:{i}"));
            by_key.entry(key).or_default().push(i);
        }
        by_key.into_values().collect()
    } else {
        (0..n).map(|i| vec![i]).collect()
    };
    units.shuffle(&mut RngState::new(spec.seed, "data/split").rng());

    let target_train = (spec.train * n as f64).round() as usize;
    let target_val = ((spec.val * n as f64).round() as usize).min(n - target_train.min(n));
    let mut parts: [Vec<usize>; 3] = Default::default();
    for unit in units {
        let slot = if parts[0].len() < target_train {
            0
        } else if parts[1].len() < target_val {
            1
        } else {
            2
        };
        parts[slot].extend(unit);
    }
    for p in &mut parts {
        p.sort_unstable();
    }

    let mut warnings = Vec::new();
    if n > 0 {
        for (name, target, p) in [("train", spec.train, &parts[0]), ("val", spec.val, &parts[1]), ("test", spec.test, &parts[2])] {
            let realized = p.len() as f64 / n as f64;
            if (realized - target).abs() > FRACTION_WARN_GAP {
                let msg = format!(
                    "{name} split holds {:.3} of rows, target {target:.3} (patient grouping)",
                    realized
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    Ok(Splits {
        train: manifest.subset(&parts[0]),
        val: manifest.subset(&parts[1]),
        test: manifest.subset(&parts[2]),
        grouped,
        warnings,
    })
}
