use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::domain::{LabelVector, PathologySet};
use crate::error::{Error, Result};

pub const IMAGE_COLUMN: &str = "Image Index";
pub const LABEL_COLUMN: &str = "Finding Labels";
pub const PATIENT_COLUMN: &str = "Patient ID";

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    /// Image path relative to the manifest directory; doubles as the image id.
    pub path: String,
    pub labels: LabelVector,
    pub patient: Option<String>,
}

/// NIH-convention image list: `Image Index,Finding Labels[,Patient ID]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub set: PathologySet,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn new(set: PathologySet, rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, r) in rows.iter().enumerate() {
            if !seen.insert(r.path.as_str()) {
                return Err(Error::Manifest {
                    row: i + 1,
                    message: format!("duplicate image path `{}`", r.path),
                });
            }
            if r.labels.bits().len() != set.len() {
                return Err(Error::Manifest {
                    row: i + 1,
                    message: "label vector does not match pathology set".into(),
                });
            }
        }
        Ok(Self { set, rows })
    }

    pub fn load(path: &Path, set: &PathologySet) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(file, set)
    }

    /// Rows are numbered from 1 (the first line after the header).
    pub fn read<R: Read>(reader: R, set: &PathologySet) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let image_col = col(IMAGE_COLUMN).ok_or_else(|| Error::Manifest {
            row: 0,
            message: format!("missing `{IMAGE_COLUMN}` column"),
        })?;
        let label_col = col(LABEL_COLUMN).ok_or_else(|| Error::Manifest {
            row: 0,
            message: format!("missing `{LABEL_COLUMN}` column"),
        })?;
        let patient_col = col(PATIENT_COLUMN);
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            let path = record.get(image_col).unwrap_or("").to_string();
            if path.is_empty() {
                return Err(Error::Manifest {
                    row,
                    message: "empty image path".into(),
                });
            }
            let raw = record.get(label_col).unwrap_or("");
            let labels = set.parse_labels(raw).map_err(|e| Error::Manifest {
                row,
                message: match e {
                    Error::UnknownLabel(token) => format!("unknown pathology `{token}`"),
                    other => other.to_string(),
                },
            })?;
            let patient = patient_col
                .and_then(|c| record.get(c))
                .filter(|s| !s.is_empty())
                .map(str::to_string);
            rows.push(ManifestRow { path, labels, patient });
        }
        Self::new(set.clone(), rows)
    }

    pub fn to_csv(&self) -> Result<String> {
        let with_patient = self.rows.iter().any(|r| r.patient.is_some());
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        if with_patient {
            w.write_record([IMAGE_COLUMN, LABEL_COLUMN, PATIENT_COLUMN])?;
        } else {
            w.write_record([IMAGE_COLUMN, LABEL_COLUMN])?;
        }
        for r in &self.rows {
            let labels = r.labels.to_joined(&self.set);
            if with_patient {
                w.write_record([r.path.as_str(), labels.as_str(), r.patient.as_deref().unwrap_or("")])?;
            } else {
                w.write_record([r.path.as_str(), labels.as_str()])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels_by_id(&self) -> HashMap<&str, &LabelVector> {
        self.rows.iter().map(|r| (r.path.as_str(), &r.labels)).collect()
    }

    /// Positive count per pathology, in set order.
    pub fn positive_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.set.len()];
        for r in &self.rows {
            for (c, &b) in counts.iter_mut().zip(r.labels.bits()) {
                if b {
                    *c += 1;
                }
            }
        }
        counts
    }

    /// Pathologies with at least one positive row, in set order.
    pub fn present_pathologies(&self) -> Vec<String> {
        self.positive_counts()
            .iter()
            .zip(self.set.names())
            .filter(|(c, _)| **c > 0)
            .map(|(_, n)| n.clone())
            .collect()
    }

    pub fn content_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_csv()?.as_bytes())))
    }

    pub fn subset(&self, indices: &[usize]) -> Manifest {
        Manifest {
            set: self.set.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Load a manifest and validate against `set`.
pub fn load_manifest(path: &Path, set: &PathologySet) -> Result<Manifest> {
    Manifest::load(path, set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Manifest> {
        Manifest::read(text.as_bytes(), &PathologySet::nih())
    }

    #[test]
    fn parses_multi_label_rows() {
        let m = parse("Image Index,Finding Labels\nimg1.png,Cardiomegaly|Effusion\nimg2.png,No Finding\n").unwrap();
        let set = PathologySet::nih();
        assert_eq!(m.rows[0].labels, set.make_label_vector(&["Cardiomegaly", "Effusion"]).unwrap());
        assert_eq!(m.rows[1].labels, set.make_label_vector(&["No Finding"]).unwrap());
    }

    #[test]
    fn unknown_token_names_row_and_token() {
        let err = parse("Image Index,Finding Labels\nimg1.png,Edema\nimg3.png,Pneumonitis\n").unwrap_err();
        match err {
            Error::Manifest { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("Pneumonitis"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_path_rejected() {
        let err = parse("Image Index,Finding Labels\na.png,Edema\na.png,Mass\n").unwrap_err();
        assert!(matches!(err, Error::Manifest { row: 2, .. }));
    }

    #[test]
    fn csv_roundtrip_with_patients() {
        let text = "Image Index,Finding Labels,Patient ID\na.png,Edema|Mass,p1\nb.png,No Finding,p2\n";
        let m = parse(text).unwrap();
        assert_eq!(m.rows[0].patient.as_deref(), Some("p1"));
        assert_eq!(m.to_csv().unwrap(), text);
    }
}
