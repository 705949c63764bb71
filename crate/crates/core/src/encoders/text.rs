use serde::{Deserialize, Serialize};

use super::{head_backward, head_forward, Architecture, Encoder, EncoderParams, Gradients, HeadCache, TokenSequence};
use crate::domain::Embedding;
use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Token-embedding text encoder: table lookup, masked mean pooling, head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextArch {
    pub vocab_size: usize,
    pub token_dim: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub max_len: usize,
}

impl TextArch {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.token_dim == 0 || self.hidden == 0 || self.embed_dim == 0 {
            return Err(Error::Config("text encoder layer sizes must be positive".into()));
        }
        if self.max_len < 2 {
            return Err(Error::Config("text max_len must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TextCache {
    /// Real (unmasked) token ids per row.
    tokens: Vec<Vec<u32>>,
    head: HeadCache,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TextEncoder;

fn arch_of(params: &EncoderParams) -> Result<&TextArch> {
    match &params.arch {
        Architecture::Text(a) => Ok(a),
        Architecture::Image(_) => Err(Error::Config("expected text encoder parameters".into())),
    }
}

impl Encoder for TextEncoder {
    type Input = TokenSequence;
    type Cache = TextCache;

    fn forward(&self, params: &EncoderParams, batch: &[TokenSequence]) -> Result<(Mat, TextCache)> {
        let arch = arch_of(params)?;
        let table = &params.tensor("token.embedding")?.data;
        let dim = arch.token_dim;
        let mut pooled = Mat::zeros(batch.len(), dim);
        let mut tokens = Vec::with_capacity(batch.len());
        for (n, seq) in batch.iter().enumerate() {
            if seq.ids.len() != arch.max_len || seq.mask.len() != arch.max_len {
                return Err(Error::Config(format!(
                    "token sequence {n} has length {}, encoder expects {}",
                    seq.ids.len(),
                    arch.max_len
                )));
            }
            let real: Vec<u32> = seq
                .ids
                .iter()
                .zip(&seq.mask)
                .filter(|(_, m)| **m)
                .map(|(id, _)| *id)
                .collect();
            if let Some(bad) = real.iter().find(|&&id| id as usize >= arch.vocab_size) {
                return Err(Error::Config(format!(
                    "token id {bad} outside vocabulary of size {}",
                    arch.vocab_size
                )));
            }
            // An all-padding sequence pools to the zero vector.
            if !real.is_empty() {
                let inv = 1.0 / real.len() as f64;
                let row = pooled.row_mut(n);
                for &id in &real {
                    let e = &table[id as usize * dim..(id as usize + 1) * dim];
                    for (p, v) in row.iter_mut().zip(e) {
                        *p += v * inv;
                    }
                }
            }
            tokens.push(real);
        }
        let head = head_forward(params, pooled)?;
        Ok((head.embeddings.clone(), TextCache { tokens, head }))
    }

    fn backward(&self, params: &EncoderParams, cache: &TextCache, d_emb: &Mat) -> Result<Gradients> {
        let arch = arch_of(params)?;
        let (d_pooled, [g_wh, g_bh, g_wo, g_bo]) = head_backward(params, &cache.head, d_emb)?;
        let dim = arch.token_dim;
        let mut g_table = vec![0.0; arch.vocab_size * dim];
        for (n, real) in cache.tokens.iter().enumerate() {
            if real.is_empty() {
                continue;
            }
            let inv = 1.0 / real.len() as f64;
            let d = d_pooled.row(n);
            for &id in real {
                let g = &mut g_table[id as usize * dim..(id as usize + 1) * dim];
                for (gv, dv) in g.iter_mut().zip(d) {
                    *gv += dv * inv;
                }
            }
        }
        Ok(Gradients {
            tensors: vec![g_table, g_wh, g_bh, g_wo, g_bo],
        })
    }
}

/// Unit-norm embeddings of a tokenized batch.
pub fn encode_text(params: &EncoderParams, batch: &[TokenSequence]) -> Result<Vec<Embedding>> {
    let e = TextEncoder.encode(params, batch)?;
    Ok((0..e.rows)
        .map(|r| Embedding {
            values: e.row(r).to_vec(),
            normalized: true,
        })
        .collect())
}
