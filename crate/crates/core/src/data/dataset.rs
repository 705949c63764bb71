use std::path::Path;

use super::manifest::{Manifest, ManifestRow};
use super::preprocess::{load_gray_png, preprocess};
use crate::domain::{LabelVector, PathologySet, RngState, Sample};
use crate::encoders::{TokenSequence, Tokenizer};
use crate::error::Result;
use crate::reports::{synthesize_report, TemplateTable};
use crate::tensor::Image;

/// Preprocessed samples with their synthetic reports already tokenized.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub set: PathologySet,
    pub samples: Vec<Sample>,
    pub tokens: Vec<TokenSequence>,
}

impl Dataset {
    /// `raw` holds `(id, unprocessed image, labels)`. Each report's sentence
    /// order comes from a stream derived from `seed` and the sample id, so it
    /// does not depend on the position of the sample in the list.
    pub fn build(
        set: &PathologySet,
        raw: Vec<(String, Image, LabelVector)>,
        size: usize,
        table: &TemplateTable,
        tokenizer: &Tokenizer,
        seed: u64,
    ) -> Result<Self> {
        let reports = RngState::new(seed, "reports");
        let mut samples = Vec::with_capacity(raw.len());
        let mut tokens = Vec::with_capacity(raw.len());
        for (id, img, labels) in raw {
            let image = preprocess(&img, size)?;
            let mut rng = reports.derive(&id).rng();
            let report = synthesize_report(&labels, set, table, Some(&mut rng))?;
            tokens.push(tokenizer.tokenize(&report)?);
            samples.push(Sample {
                id,
                image,
                labels,
                report,
            });
        }
        Ok(Self {
            set: set.clone(),
            samples,
            tokens,
        })
    }

    /// Loads every image of `manifest`, paths resolved against `root`.
    pub fn from_manifest(
        manifest: &Manifest,
        root: &Path,
        size: usize,
        table: &TemplateTable,
        tokenizer: &Tokenizer,
        seed: u64,
    ) -> Result<Self> {
        let raw = load_images(manifest, root)?;
        Self::build(&manifest.set, raw, size, table, tokenizer, seed)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Ground truth of the samples as a manifest (ids as paths).
    pub fn manifest(&self) -> Result<Manifest> {
        let rows = self
            .samples
            .iter()
            .map(|s| ManifestRow {
                path: s.id.clone(),
                labels: s.labels.clone(),
                patient: None,
            })
            .collect();
        Manifest::new(self.set.clone(), rows)
    }

    pub fn images(&self, indices: &[usize]) -> Vec<Image> {
        indices.iter().map(|&i| self.samples[i].image.clone()).collect()
    }

    pub fn token_batch(&self, indices: &[usize]) -> Vec<TokenSequence> {
        indices.iter().map(|&i| self.tokens[i].clone()).collect()
    }
}

/// Raw grayscale images of `manifest` in row order.
pub fn load_images(manifest: &Manifest, root: &Path) -> Result<Vec<(String, Image, LabelVector)>> {
    manifest
        .rows
        .iter()
        .map(|r| Ok((r.path.clone(), load_gray_png(&root.join(&r.path))?, r.labels.clone())))
        .collect()
}
