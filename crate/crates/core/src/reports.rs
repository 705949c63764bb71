//! Synthetic report text and zero-shot prompt pairs, driven by a template
//! table.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{LabelVector, PathologySet};
use crate::error::{Error, Result};

const DEFAULT_TEMPLATES: &str = include_str!("../assets/templates.toml");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub report_sentence: String,
    pub prompt_pos: String,
    pub prompt_neg: String,
}

/// Pathology name → report sentence and prompt pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateTable {
    entries: BTreeMap<String, Template>,
}

impl TemplateTable {
    /// The table shipped with the crate.
    pub fn default_table() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("shipped template table is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: TemplateTable = toml::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn validate(&self) -> Result<()> {
        for (name, t) in &self.entries {
            for (field, value) in [
                ("report_sentence", &t.report_sentence),
                ("prompt_pos", &t.prompt_pos),
                ("prompt_neg", &t.prompt_neg),
            ] {
                if value.trim().is_empty() {
                    return Err(Error::Config(format!("template `{name}`: empty {field}")));
                }
            }
            if t.prompt_pos == t.prompt_neg {
                return Err(Error::Config(format!(
                    "template `{name}`: positive and negative prompts are identical"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, pathology: &str) -> Option<&Template> {
        self.entries.get(pathology)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &Template)> {
        self.entries.iter()
    }

    pub fn insert(&mut self, pathology: impl Into<String>, template: Template) {
        self.entries.insert(pathology.into(), template);
    }

    /// Errors naming the first pathology of `names` without an entry.
    pub fn require<S: AsRef<str>>(&self, names: &[S]) -> Result<()> {
        match names.iter().find(|n| !self.entries.contains_key(n.as_ref())) {
            Some(missing) => Err(Error::Config(format!(
                "template table has no entry for pathology `{}`",
                missing.as_ref()
            ))),
            None => Ok(()),
        }
    }

    /// Every string of the table, for building a tokenizer vocabulary.
    pub fn lexicon(&self) -> Vec<&str> {
        self.entries
            .values()
            .flat_map(|t| [t.report_sentence.as_str(), t.prompt_pos.as_str(), t.prompt_neg.as_str()])
            .collect()
    }

    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in &self.entries {
            for s in [name, &t.report_sentence, &t.prompt_pos, &t.prompt_neg] {
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Space-joined report sentences of every set label. Sentence order follows
/// the pathology set unless `rng` is given, in which case it is shuffled.
pub fn synthesize_report<R: Rng>(
    labels: &LabelVector,
    set: &PathologySet,
    table: &TemplateTable,
    rng: Option<&mut R>,
) -> Result<String> {
    let names = labels.names(set);
    table.require(&names)?;
    let mut sentences: Vec<&str> = names
        .iter()
        .map(|n| table.entries[*n].report_sentence.as_str())
        .collect();
    if let Some(rng) = rng {
        sentences.shuffle(rng);
    }
    Ok(sentences.join(" "))
}

/// `(positive prompt, negative prompt)` for `pathology`.
pub fn prompt_pair<'a>(pathology: &str, table: &'a TemplateTable) -> Result<(&'a str, &'a str)> {
    table
        .get(pathology)
        .map(|t| (t.prompt_pos.as_str(), t.prompt_neg.as_str()))
        .ok_or_else(|| Error::Config(format!("template table has no entry for pathology `{pathology}`")))
}
