use std::path::Path;

use super::config::TrainConfig;
use super::run::TrainData;
use crate::data::{load_images, split, Dataset, Manifest, Splits};
use crate::encoders::Tokenizer;
use crate::error::{Error, Result};
use crate::reports::TemplateTable;
use crate::tensor::Image;

/// Split, preprocessed and tokenized data ready for training.
pub struct Prepared {
    pub data: TrainData,
    pub test: Dataset,
    pub splits: Splits,
    pub tokenizer: Tokenizer,
    /// Classes scored in zero-shot evaluation: those with at least one
    /// positive in the training split, in set order.
    pub classes: Vec<String>,
    pub dataset_hash: String,
}

/// `images[i]` is the raw image of `manifest.rows[i]`.
pub fn prepare(manifest: &Manifest, images: Vec<Image>, cfg: &TrainConfig, table: &TemplateTable) -> Result<Prepared> {
    cfg.validate()?;
    if images.len() != manifest.len() {
        return Err(Error::Config(format!(
            "{} images for {} manifest rows",
            images.len(),
            manifest.len()
        )));
    }
    let present = manifest.present_pathologies();
    table.require(&present)?;
    let tokenizer = Tokenizer::from_lexicon(table.lexicon(), cfg.model.max_len);
    let splits = split(manifest, &cfg.split)?;
    let by_id: std::collections::HashMap<&str, usize> =
        manifest.rows.iter().enumerate().map(|(i, r)| (r.path.as_str(), i)).collect();
    let build = |m: &Manifest| -> Result<Dataset> {
        let raw = m
            .rows
            .iter()
            .map(|r| (r.path.clone(), images[by_id[r.path.as_str()]].clone(), r.labels.clone()))
            .collect();
        Dataset::build(&manifest.set, raw, cfg.model.image_size, table, &tokenizer, cfg.seed)
    };
    let train = build(&splits.train)?;
    let val = build(&splits.val)?;
    let test = build(&splits.test)?;
    let classes = splits.train.present_pathologies();
    Ok(Prepared {
        data: TrainData { train, val },
        test,
        tokenizer,
        classes,
        dataset_hash: manifest.content_hash()?,
        splits,
    })
}

/// Loads the images of `manifest` from `root` and prepares them.
pub fn prepare_from_disk(manifest: &Manifest, root: &Path, cfg: &TrainConfig, table: &TemplateTable) -> Result<Prepared> {
    let images = load_images(manifest, root)?.into_iter().map(|(_, img, _)| img).collect();
    prepare(manifest, images, cfg, table)
}
