//! Label vocabulary, multi-hot label vectors, unit embeddings and named
//! random streams shared by every stage of the pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Image;

pub const NO_FINDING: &str = "No Finding";

/// NIH ChestX-ray14 label order: 14 findings followed by "No Finding".
pub const NIH_PATHOLOGIES: [&str; 15] = [
    "Atelectasis",
    "Consolidation",
    "Infiltration",
    "Pneumothorax",
    "Edema",
    "Emphysema",
    "Fibrosis",
    "Effusion",
    "Pneumonia",
    "Pleural Thickening",
    "Cardiomegaly",
    "Nodule",
    "Mass",
    "Hernia",
    NO_FINDING,
];

/// CheXpert competition label order.
pub const CHEXPERT_PATHOLOGIES: [&str; 14] = [
    "Atelectasis",
    "Cardiomegaly",
    "Consolidation",
    "Edema",
    "Enlarged Cardiomediastinum",
    "Fracture",
    "Lung Lesion",
    "Lung Opacity",
    "Pleural Effusion",
    "Pleural Other",
    "Pneumonia",
    "Pneumothorax",
    "Support Devices",
    NO_FINDING,
];

/// Ordered, duplicate-free label vocabulary of one dataset profile.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathologySet {
    profile: String,
    names: Vec<String>,
}

impl PathologySet {
    pub fn new(profile: impl Into<String>, names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("pathology set is empty".into()));
        }
        for (i, name) in names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::Config("empty pathology name".into()));
            }
            if names[..i].contains(name) {
                return Err(Error::Config(format!("duplicate pathology `{name}`")));
            }
        }
        Ok(Self {
            profile: profile.into(),
            names,
        })
    }

    pub fn nih() -> Self {
        Self {
            profile: "nih".into(),
            names: NIH_PATHOLOGIES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn chexpert() -> Self {
        Self {
            profile: "chexpert".into(),
            names: CHEXPERT_PATHOLOGIES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn from_profile(profile: &str) -> Result<Self> {
        match profile {
            "nih" => Ok(Self::nih()),
            "chexpert" => Ok(Self::chexpert()),
            other => Err(Error::Config(format!(
                "unknown dataset profile `{other}` (expected one of: nih, chexpert)"
            ))),
        }
    }

    pub fn profile(&self) -> &str {
        &self.profile
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn no_finding_index(&self) -> Option<usize> {
        self.index_of(NO_FINDING)
    }

    /// Multi-hot encoding of `names` in this set's order.
    pub fn make_label_vector<S: AsRef<str>>(&self, names: &[S]) -> Result<LabelVector> {
        if names.is_empty() {
            return Err(Error::Degenerate("empty label list".into()));
        }
        let mut bits = vec![false; self.len()];
        for name in names {
            let name = name.as_ref();
            let idx = self
                .index_of(name)
                .ok_or_else(|| Error::UnknownLabel(name.to_string()))?;
            bits[idx] = true;
        }
        if let Some(nf) = self.no_finding_index() {
            if bits[nf] {
                if let Some(other) = bits
                    .iter()
                    .enumerate()
                    .find(|&(i, &b)| b && i != nf)
                    .map(|(i, _)| &self.names[i])
                {
                    return Err(Error::Exclusivity(other.clone()));
                }
            }
        }
        Ok(LabelVector { bits })
    }

    /// Parses an NIH-style `A|B|C` label string.
    pub fn parse_labels(&self, joined: &str) -> Result<LabelVector> {
        let names: Vec<&str> = joined
            .split('|')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        self.make_label_vector(&names)
    }
}

/// Binary indicators aligned to a [`PathologySet`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelVector {
    bits: Vec<bool>,
}

impl LabelVector {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_set(&self, index: usize) -> bool {
        self.bits.get(index).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn names<'a>(&self, set: &'a PathologySet) -> Vec<&'a str> {
        self.bits
            .iter()
            .zip(set.names())
            .filter(|(b, _)| **b)
            .map(|(_, n)| n.as_str())
            .collect()
    }

    pub fn to_joined(&self, set: &PathologySet) -> String {
        self.names(set).join("|")
    }
}

/// Real vector in the shared embedding space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `v` to unit Euclidean norm. A zero (or non-finite) vector is an
/// error rather than being smoothed with an epsilon.
pub fn l2_normalize(v: &[f64]) -> Result<Embedding> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Degenerate(format!(
            "cannot normalize vector with norm {n}"
        )));
    }
    Ok(Embedding {
        values: v.iter().map(|x| x / n).collect(),
        normalized: true,
    })
}

/// Named deterministic random stream.
///
/// The same `(seed, stream)` pair always produces the same draws. Streams
/// used by the pipeline: `data`, `init`, `augment`, `train`; per-step and
/// per-epoch draws use derived sub-streams such as `augment/step/12`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: String,
}

impl RngState {
    pub fn new(seed: u64, stream: impl Into<String>) -> Self {
        Self {
            seed,
            stream: stream.into(),
        }
    }

    pub fn derive(&self, tag: impl std::fmt::Display) -> Self {
        Self {
            seed: self.seed,
            stream: format!("{}/{}", self.stream, tag),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let digest = Sha256::digest(self.stream.as_bytes());
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::from_le_bytes(word));
        rng
    }
}

/// One training/evaluation example.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    pub labels: LabelVector,
    pub report: String,
}
