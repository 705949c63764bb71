//! One-off conversion of CheXpert-style CSVs into the NIH manifest layout.
//!
//! CheXpert stores one column per class with `1`, `0`, `-1` (uncertain) or
//! blank. Only `1` counts as positive; uncertainty is not modeled. Classes
//! are mapped onto the NIH vocabulary by name, with `Pleural Effusion`
//! becoming `Effusion`. Classes without an NIH counterpart are dropped.

use std::collections::BTreeSet;
use std::io::Read;

use super::manifest::{Manifest, ManifestRow};
use crate::domain::{PathologySet, NO_FINDING};
use crate::error::{Error, Result};

pub const PATH_COLUMN: &str = "Path";

fn nih_name(chexpert: &str) -> Option<&'static str> {
    Some(match chexpert {
        "Atelectasis" => "Atelectasis",
        "Cardiomegaly" => "Cardiomegaly",
        "Consolidation" => "Consolidation",
        "Edema" => "Edema",
        "Pleural Effusion" => "Effusion",
        "Pneumonia" => "Pneumonia",
        "Pneumothorax" => "Pneumothorax",
        "No Finding" => NO_FINDING,
        _ => return None,
    })
}

fn is_positive(cell: &str) -> bool {
    cell.trim().parse::<f64>().map(|v| v == 1.0).unwrap_or(false)
}

/// `patientNNNNN` path component, when present.
fn patient_of(path: &str) -> Option<String> {
    path.split('/').find(|p| p.starts_with("patient")).map(str::to_string)
}

#[derive(Clone, Debug)]
pub struct Conversion {
    pub manifest: Manifest,
    pub dropped_classes: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn convert_chexpert<R: Read>(reader: R) -> Result<Conversion> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let path_col = headers.iter().position(|h| h == PATH_COLUMN).ok_or_else(|| Error::Manifest {
        row: 0,
        message: format!("missing `{PATH_COLUMN}` column"),
    })?;
    let known: BTreeSet<&str> = crate::domain::CHEXPERT_PATHOLOGIES.iter().copied().collect();
    let mut mapped = Vec::new();
    let mut dropped = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if !known.contains(h) {
            continue;
        }
        match nih_name(h) {
            Some(n) => mapped.push((i, n)),
            None => dropped.push(h.to_string()),
        }
    }
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        let msg = format!("dropping classes with no NIH counterpart: {}", dropped.join(", "));
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let set = PathologySet::nih();
    let mut rows = Vec::new();
    let mut conflicts = 0usize;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let path = record.get(path_col).unwrap_or("").to_string();
        let mut diseases: Vec<&str> = Vec::new();
        let mut no_finding = false;
        for &(col, name) in &mapped {
            if is_positive(record.get(col).unwrap_or("")) {
                if name == NO_FINDING {
                    no_finding = true;
                } else {
                    diseases.push(name);
                }
            }
        }
        if no_finding && !diseases.is_empty() {
            conflicts += 1;
        }
        let names = if diseases.is_empty() { vec![NO_FINDING] } else { diseases };
        let labels = set.make_label_vector(&names).map_err(|e| Error::Manifest {
            row: i + 1,
            message: e.to_string(),
        })?;
        rows.push(ManifestRow {
            patient: patient_of(&path),
            path,
            labels,
        });
    }
    if conflicts > 0 {
        let msg = format!("{conflicts} rows marked No Finding alongside a finding; the finding was kept");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(Conversion {
        manifest: Manifest::new(set, rows)?,
        dropped_classes: dropped,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "Path,Sex,No Finding,Cardiomegaly,Lung Opacity,Pleural Effusion,Fracture\n\
        train/patient00001/study1/view1_frontal.jpg,F,,1.0,1.0,-1.0,\n\
        train/patient00002/study1/view1_frontal.jpg,M,1.0,,,0.0,\n\
        train/patient00002/study2/view1_frontal.jpg,M,,,1.0,,1.0\n\
        train/patient00003/study1/view1_frontal.jpg,M,,0.0,,1.0,\n";

    #[test]
    fn maps_and_drops() {
        let c = convert_chexpert(CSV.as_bytes()).unwrap();
        let set = PathologySet::nih();
        let m = &c.manifest;
        assert_eq!(c.dropped_classes, vec!["Lung Opacity", "Fracture"]);
        assert_eq!(m.rows[0].labels, set.make_label_vector(&["Cardiomegaly"]).unwrap());
        assert_eq!(m.rows[1].labels, set.make_label_vector(&[NO_FINDING]).unwrap());
        // Only dropped classes positive: nothing left, so No Finding.
        assert_eq!(m.rows[2].labels, set.make_label_vector(&[NO_FINDING]).unwrap());
        assert_eq!(m.rows[3].labels, set.make_label_vector(&["Effusion"]).unwrap());
        assert_eq!(m.rows[2].patient.as_deref(), Some("patient00002"));
        assert!(!c.warnings.is_empty());
    }
}
