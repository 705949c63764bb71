//! On-disk run configuration: a `[data]` table naming the dataset and
//! template file, and a `[train]` table mirroring [`TrainConfig`].
//!
//! Relative paths are resolved against the directory of the file they were
//! read from.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::PathologySet;
use crate::error::{Error, Result};
use crate::reports::TemplateTable;
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Label vocabulary: `nih` or `chexpert`.
    pub profile: String,
    pub manifest: Option<PathBuf>,
    /// Directory the manifest's image paths are relative to. Defaults to the
    /// manifest's directory.
    pub image_root: Option<PathBuf>,
    /// Template table overriding the built-in one.
    pub templates: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            profile: "nih".into(),
            manifest: None,
            image_root: None,
            templates: None,
        }
    }
}

impl DataConfig {
    pub fn pathology_set(&self) -> Result<PathologySet> {
        PathologySet::from_profile(&self.profile)
    }

    pub fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Config("no manifest given (set data.manifest or pass --manifest)".into()))
    }

    pub fn image_root(&self) -> Result<PathBuf> {
        match &self.image_root {
            Some(r) => Ok(r.clone()),
            None => Ok(self
                .manifest_path()?
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()),
        }
    }

    pub fn template_table(&self) -> Result<TemplateTable> {
        match &self.templates {
            Some(p) => TemplateTable::load(p),
            None => Ok(TemplateTable::default_table()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub data: DataConfig,
    pub train: TrainConfig,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.train.validate()?;
        cfg.data.pathology_set()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data.resolve_relative(base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

impl DataConfig {
    fn resolve_relative(&mut self, base: &Path) {
        for p in [&mut self.manifest, &mut self.image_root, &mut self.templates]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                let joined = base.join(&*p);
                *p = std::path::absolute(&joined).unwrap_or(joined);
            }
        }
    }
}
