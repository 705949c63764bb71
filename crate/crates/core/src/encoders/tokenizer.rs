use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const START_ID: u32 = 2;
pub const END_ID: u32 = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<start>", "<end>"];

/// Fixed-length token ids with a padding mask (`true` = real token).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub mask: Vec<bool>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn all_padding(max_len: usize) -> Self {
        Self {
            ids: vec![PAD_ID; max_len],
            mask: vec![false; max_len],
        }
    }
}

/// Closed-vocabulary lowercase word tokenizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "TokenizerRepr", into = "TokenizerRepr")]
pub struct Tokenizer {
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    max_len: usize,
}

#[derive(Serialize, Deserialize)]
struct TokenizerRepr {
    vocab: Vec<String>,
    max_len: usize,
}

impl From<TokenizerRepr> for Tokenizer {
    fn from(r: TokenizerRepr) -> Self {
        Tokenizer::from_vocab(r.vocab, r.max_len)
    }
}

impl From<Tokenizer> for TokenizerRepr {
    fn from(t: Tokenizer) -> Self {
        TokenizerRepr {
            vocab: t.vocab,
            max_len: t.max_len,
        }
    }
}

/// Lowercase and split on anything that is not alphanumeric.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

impl Tokenizer {
    pub const DEFAULT_MAX_LEN: usize = 77;

    /// Vocabulary = the four specials followed by the sorted distinct words
    /// of `texts`.
    pub fn from_lexicon<'a>(texts: impl IntoIterator<Item = &'a str>, max_len: usize) -> Self {
        let mut all: Vec<String> = texts.into_iter().flat_map(words).collect();
        all.sort();
        all.dedup();
        Self::from_vocab(all, max_len)
    }

    /// `words` must not include the specials; they are prepended.
    pub fn from_vocab(words: Vec<String>, max_len: usize) -> Self {
        let mut vocab: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        for w in words {
            if !vocab.contains(&w) {
                vocab.push(w);
            }
        }
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self { vocab, index, max_len }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Words only, without the specials.
    pub fn words(&self) -> &[String] {
        &self.vocab[SPECIALS.len()..]
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    /// `[START, w…, END]` truncated so END always fits, then padded to
    /// `max_len`.
    pub fn tokenize(&self, text: &str) -> Result<TokenSequence> {
        if self.max_len < 2 {
            return Err(Error::Config("max_len must leave room for sentinels".into()));
        }
        let ws = words(text);
        if ws.is_empty() {
            return Err(Error::Degenerate("cannot tokenize empty text".into()));
        }
        let body = ws.len().min(self.max_len - 2);
        let mut ids = Vec::with_capacity(self.max_len);
        ids.push(START_ID);
        ids.extend(ws[..body].iter().map(|w| self.id(w)));
        ids.push(END_ID);
        let real = ids.len();
        ids.resize(self.max_len, PAD_ID);
        let mask = (0..self.max_len).map(|i| i < real).collect();
        Ok(TokenSequence { ids, mask })
    }
}
