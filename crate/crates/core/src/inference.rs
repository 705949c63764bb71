//! Zero-shot multi-label classification with positive/negative prompt pairs.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::encoders::{encode_image, encode_text, EncoderParams, Tokenizer};
use crate::error::{Error, Result};
use crate::reports::{prompt_pair, TemplateTable};
use crate::tensor::{dot, Image};

pub const DEFAULT_INFERENCE_TEMPERATURE: f64 = 1.0;
const IMAGE_CHUNK: usize = 256;

pub const LONG_HEADER: [&str; 5] = ["image_id", "pathology", "probability", "s_pos", "s_neg"];
pub const WIDE_ID_COLUMN: &str = "Image Index";

/// `e^{s⁺/τ} / (e^{s⁺/τ} + e^{s⁻/τ})`, evaluated as a logistic of the
/// difference so large similarities cannot overflow.
pub fn pair_probability(s_pos: f64, s_neg: f64, tau: f64) -> f64 {
    let z = (s_pos - s_neg) / tau;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per image, per pathology: probability and the two similarities.
///
/// Results read back from the wide format carry no similarities; those
/// entries are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroShotResult {
    pub ids: Vec<String>,
    pub pathologies: Vec<String>,
    /// `ids.len() × pathologies.len()`, row-major.
    pub probability: Vec<f64>,
    pub s_pos: Vec<f64>,
    pub s_neg: Vec<f64>,
}

impl ZeroShotResult {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn probability(&self, image: usize, pathology: usize) -> f64 {
        self.probability[image * self.pathologies.len() + pathology]
    }

    /// Probabilities of one pathology across all images.
    pub fn column(&self, pathology: usize) -> Vec<f64> {
        let k = self.pathologies.len();
        (0..self.ids.len()).map(|i| self.probability[i * k + pathology]).collect()
    }

    pub fn write_long<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(LONG_HEADER)?;
        let k = self.pathologies.len();
        for (i, id) in self.ids.iter().enumerate() {
            for (j, p) in self.pathologies.iter().enumerate() {
                let at = i * k + j;
                out.write_record([
                    id.as_str(),
                    p.as_str(),
                    &self.probability[at].to_string(),
                    &self.s_pos[at].to_string(),
                    &self.s_neg[at].to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_wide<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![WIDE_ID_COLUMN.to_string()];
        header.extend(self.pathologies.iter().cloned());
        out.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend((0..self.pathologies.len()).map(|j| self.probability(i, j).to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_long(&self, path: &Path) -> Result<()> {
        self.write_long(std::fs::File::create(path)?)
    }

    pub fn save_wide(&self, path: &Path) -> Result<()> {
        self.write_wide(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    /// Reads either layout, detected from the header.
    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header == LONG_HEADER {
            read_long(rdr)
        } else if header.first().map(String::as_str) == Some(WIDE_ID_COLUMN) && header.len() > 1 {
            read_wide(rdr, header[1..].to_vec())
        } else {
            Err(Error::Config(format!(
                "unrecognized predictions header {:?}",
                header
            )))
        }
    }
}

fn parse_num(s: &str, row: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Manifest {
        row,
        message: format!("`{s}` is not a number"),
    })
}

fn read_long<R: Read>(mut rdr: csv::Reader<R>) -> Result<ZeroShotResult> {
    let mut ids: Vec<String> = Vec::new();
    let mut pathologies: Vec<String> = Vec::new();
    let mut cells: HashMap<(usize, usize), [f64; 3]> = HashMap::new();
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut p_index: HashMap<String, usize> = HashMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = n + 1;
        let id = rec.get(0).unwrap_or("").to_string();
        let p = rec.get(1).unwrap_or("").to_string();
        let i = *id_index.entry(id.clone()).or_insert_with(|| {
            ids.push(id);
            ids.len() - 1
        });
        let j = *p_index.entry(p.clone()).or_insert_with(|| {
            pathologies.push(p);
            pathologies.len() - 1
        });
        let vals = [
            parse_num(rec.get(2).unwrap_or(""), row)?,
            parse_num(rec.get(3).unwrap_or(""), row)?,
            parse_num(rec.get(4).unwrap_or(""), row)?,
        ];
        if cells.insert((i, j), vals).is_some() {
            return Err(Error::Manifest {
                row,
                message: "duplicate (image, pathology) entry".into(),
            });
        }
    }
    let k = pathologies.len();
    let mut res = ZeroShotResult {
        probability: vec![0.0; ids.len() * k],
        s_pos: vec![0.0; ids.len() * k],
        s_neg: vec![0.0; ids.len() * k],
        ids,
        pathologies,
    };
    for i in 0..res.ids.len() {
        for j in 0..k {
            let [p, sp, sn] = cells.get(&(i, j)).ok_or_else(|| {
                Error::Config(format!(
                    "predictions lack pathology `{}` for image `{}`",
                    res.pathologies[j], res.ids[i]
                ))
            })?;
            res.probability[i * k + j] = *p;
            res.s_pos[i * k + j] = *sp;
            res.s_neg[i * k + j] = *sn;
        }
    }
    Ok(res)
}

fn read_wide<R: Read>(mut rdr: csv::Reader<R>, pathologies: Vec<String>) -> Result<ZeroShotResult> {
    let mut ids = Vec::new();
    let mut probability = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        ids.push(rec.get(0).unwrap_or("").to_string());
        for j in 0..pathologies.len() {
            probability.push(parse_num(rec.get(j + 1).unwrap_or(""), n + 1)?);
        }
    }
    let nan = vec![f64::NAN; probability.len()];
    Ok(ZeroShotResult {
        ids,
        pathologies,
        probability,
        s_pos: nan.clone(),
        s_neg: nan,
    })
}

/// Embedded positive and negative prompts for a list of pathologies.
#[derive(Clone, Debug)]
pub struct PromptBank {
    pub pathologies: Vec<String>,
    pub pos: Vec<Vec<f64>>,
    pub neg: Vec<Vec<f64>>,
}

impl PromptBank {
    pub fn build(
        text: &EncoderParams,
        tokenizer: &Tokenizer,
        table: &TemplateTable,
        pathologies: &[String],
    ) -> Result<Self> {
        let mut pos_tokens = Vec::with_capacity(pathologies.len());
        let mut neg_tokens = Vec::with_capacity(pathologies.len());
        for p in pathologies {
            let (pos, neg) = prompt_pair(p, table)?;
            pos_tokens.push(tokenizer.tokenize(pos)?);
            neg_tokens.push(tokenizer.tokenize(neg)?);
        }
        let pos = encode_text(text, &pos_tokens)?.into_iter().map(|e| e.values).collect();
        let neg = encode_text(text, &neg_tokens)?.into_iter().map(|e| e.values).collect();
        Ok(Self {
            pathologies: pathologies.to_vec(),
            pos,
            neg,
        })
    }
}

/// Prompt banks keyed by (template table hash, text encoder hash, classes).
#[derive(Debug, Default)]
pub struct PromptCache {
    entries: HashMap<(String, String, Vec<String>), PromptBank>,
}

impl PromptCache {
    pub fn get_or_build(
        &mut self,
        text: &EncoderParams,
        tokenizer: &Tokenizer,
        table: &TemplateTable,
        pathologies: &[String],
    ) -> Result<&PromptBank> {
        let key = (table.content_hash(), text.content_hash(), pathologies.to_vec());
        if !self.entries.contains_key(&key) {
            let bank = PromptBank::build(text, tokenizer, table, pathologies)?;
            self.entries.insert(key.clone(), bank);
        }
        Ok(&self.entries[&key])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Scores preprocessed `images` against a prompt bank with the main image
/// encoder.
pub fn classify_with_bank(
    image: &EncoderParams,
    images: &[Image],
    ids: &[String],
    bank: &PromptBank,
    tau: f64,
) -> Result<ZeroShotResult> {
    if ids.len() != images.len() {
        return Err(Error::Config(format!(
            "{} ids for {} images",
            ids.len(),
            images.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("inference temperature {tau} must be positive")));
    }
    let k = bank.pathologies.len();
    let mut res = ZeroShotResult {
        ids: ids.to_vec(),
        pathologies: bank.pathologies.clone(),
        probability: Vec::with_capacity(images.len() * k),
        s_pos: Vec::with_capacity(images.len() * k),
        s_neg: Vec::with_capacity(images.len() * k),
    };
    for chunk in images.chunks(IMAGE_CHUNK) {
        for emb in encode_image(image, chunk)? {
            for j in 0..k {
                let sp = dot(&emb.values, &bank.pos[j]);
                let sn = dot(&emb.values, &bank.neg[j]);
                res.s_pos.push(sp);
                res.s_neg.push(sn);
                res.probability.push(pair_probability(sp, sn, tau));
            }
        }
    }
    Ok(res)
}

/// Zero-shot classification of `images` for `pathologies`, using the main
/// (never the momentum) encoders.
#[allow(clippy::too_many_arguments)]
pub fn classify(
    image: &EncoderParams,
    text: &EncoderParams,
    tokenizer: &Tokenizer,
    table: &TemplateTable,
    pathologies: &[String],
    images: &[Image],
    ids: &[String],
    tau: f64,
) -> Result<ZeroShotResult> {
    let bank = PromptBank::build(text, tokenizer, table, pathologies)?;
    classify_with_bank(image, images, ids, &bank, tau)
}
