//! Single-file training checkpoint.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "MOCOCKPT"
//! version      u32
//! header_len   u64
//! header       header_len bytes of UTF-8 JSON (CheckpointHeader)
//! blobs        in header order, each:
//!                ndim  u32
//!                dims  ndim × u64
//!                data  product(dims) × f64
//! ```
//!
//! The header lists every blob with its shape and SHA-256 (over the data
//! bytes), plus everything needed to resume: config, tokenizer, counters,
//! optimizer hyper-parameters and queue pointers.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use super::optim::AdamW;
use super::step::TrainState;
use crate::domain::RngState;
use crate::encoders::{EncoderPair, EncoderParams, Tokenizer};
use crate::error::{Error, Result};
use crate::queue::KeyQueue;

pub const MAGIC: &[u8; 8] = b"MOCOCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueMeta {
    pub capacity: usize,
    pub dim: usize,
    pub head: usize,
    pub fill: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: TrainConfig,
    pub tokenizer: Tokenizer,
    pub classes: Vec<String>,
    pub step: u64,
    pub epoch: usize,
    pub batch_in_epoch: usize,
    pub epoch_loss_sum: f64,
    pub best_val_auc: Option<f64>,
    pub image_momentum: f64,
    pub text_momentum: f64,
    pub optimizer_step: u64,
    pub image_queue: Option<QueueMeta>,
    pub text_queue: Option<QueueMeta>,
    /// Streams the next step will draw from; derived from the counters.
    pub rng_streams: Vec<RngState>,
    pub image_params_hash: String,
    pub text_params_hash: String,
    pub blobs: Vec<BlobEntry>,
}

fn blob_hash(data: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in data {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

struct Blobs<'a> {
    entries: Vec<BlobEntry>,
    data: Vec<&'a [f64]>,
}

impl<'a> Blobs<'a> {
    fn push(&mut self, name: String, shape: Vec<usize>, data: &'a [f64]) {
        self.entries.push(BlobEntry {
            name,
            shape,
            sha256: blob_hash(data),
        });
        self.data.push(data);
    }

    fn params(&mut self, prefix: &str, p: &'a EncoderParams) {
        for t in &p.tensors {
            self.push(format!("{prefix}.{}", t.name), t.shape.clone(), &t.data);
        }
    }
}

fn queue_meta(q: &KeyQueue) -> QueueMeta {
    QueueMeta {
        capacity: q.capacity(),
        dim: q.dim(),
        head: q.head(),
        fill: q.fill(),
    }
}

fn collect_blobs(state: &TrainState) -> Blobs<'_> {
    let mut b = Blobs {
        entries: Vec::new(),
        data: Vec::new(),
    };
    b.params("image.main", &state.image.main);
    b.params("image.momentum", &state.image.momentum);
    b.params("text.main", &state.text.main);
    b.params("text.momentum", &state.text.momentum);
    for (i, m) in state.optimizer.m.iter().enumerate() {
        b.push(format!("adam.m.{i}"), vec![m.len()], m);
    }
    for (i, v) in state.optimizer.v.iter().enumerate() {
        b.push(format!("adam.v.{i}"), vec![v.len()], v);
    }
    if let Some(q) = &state.image_queue {
        b.push("queue.image".into(), vec![q.capacity(), q.dim()], q.storage());
    }
    if let Some(q) = &state.text_queue {
        b.push("queue.text".into(), vec![q.capacity(), q.dim()], q.storage());
    }
    b
}

pub fn write_checkpoint<W: Write>(state: &TrainState, mut w: W) -> Result<()> {
    let blobs = collect_blobs(state);
    let seed = state.config.seed;
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        config: state.config.clone(),
        tokenizer: state.tokenizer.clone(),
        classes: state.classes.clone(),
        step: state.step,
        epoch: state.epoch,
        batch_in_epoch: state.batch_in_epoch,
        epoch_loss_sum: state.epoch_loss_sum,
        best_val_auc: state.best_val_auc,
        image_momentum: state.image.coefficient(),
        text_momentum: state.text.coefficient(),
        optimizer_step: state.optimizer.step,
        image_queue: state.image_queue.as_ref().map(queue_meta),
        text_queue: state.text_queue.as_ref().map(queue_meta),
        rng_streams: vec![
            RngState::new(seed, "augment").derive(format!("step/{}", state.step)),
            RngState::new(seed, "data").derive(format!("epoch/{}", state.epoch)),
        ],
        image_params_hash: state.image.main.content_hash(),
        text_params_hash: state.text.main.content_hash(),
        blobs: blobs.entries.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (entry, data) in blobs.entries.iter().zip(&blobs.data) {
        w.write_all(&(entry.shape.len() as u32).to_le_bytes())?;
        for d in &entry.shape {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(data.len() * 8);
        for v in data.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Writes to a sibling temporary file, syncs it, then renames over `path`,
/// so a failed write leaves any previous checkpoint intact.
pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Checkpoint(format!("invalid checkpoint path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        write_checkpoint(state, &mut f)?;
        let f = f.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

fn read_blob<R: Read>(r: &mut R, entry: &BlobEntry) -> Result<Vec<f64>> {
    let ndim = u32::from_le_bytes(read_exact(r)?) as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(u64::from_le_bytes(read_exact(r)?) as usize);
    }
    if dims != entry.shape {
        return Err(Error::Checkpoint(format!(
            "blob `{}` has shape {dims:?}, header says {:?}",
            entry.name, entry.shape
        )));
    }
    let len: usize = dims.iter().product();
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Checkpoint(format!("truncated blob `{}`: {e}", entry.name)))?;
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if blob_hash(&data) != entry.sha256 {
        return Err(Error::Checkpoint(format!("blob `{}` fails its hash check", entry.name)));
    }
    Ok(data)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<TrainState> {
    let magic: [u8; 8] = read_exact(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let header_len = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let mut json = vec![0u8; header_len];
    r.read_exact(&mut json)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    let header: CheckpointHeader = serde_json::from_slice(&json)?;

    let mut blobs = std::collections::HashMap::new();
    for entry in &header.blobs {
        blobs.insert(entry.name.clone(), read_blob(&mut r, entry)?);
    }
    let mut take = |name: &str| -> Result<Vec<f64>> {
        blobs
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing blob `{name}`")))
    };

    let cfg = &header.config;
    let mut params = |prefix: &str, arch| -> Result<EncoderParams> {
        let mut p = EncoderParams::zeros(arch)?;
        for t in &mut p.tensors {
            let data = take(&format!("{prefix}.{}", t.name))?;
            if data.len() != t.data.len() {
                return Err(Error::Checkpoint(format!("blob `{prefix}.{}` has wrong length", t.name)));
            }
            t.data = data;
        }
        Ok(p)
    };
    let image_arch = cfg.model.image_arch();
    let text_arch = cfg.model.text_arch(header.tokenizer.vocab_size());
    let image = EncoderPair::from_parts(
        params("image.main", image_arch.clone())?,
        params("image.momentum", image_arch)?,
        header.image_momentum,
    )?;
    let text = EncoderPair::from_parts(
        params("text.main", text_arch.clone())?,
        params("text.momentum", text_arch)?,
        header.text_momentum,
    )?;
    if image.main.content_hash() != header.image_params_hash || text.main.content_hash() != header.text_params_hash {
        return Err(Error::Checkpoint("parameter hash mismatch".into()));
    }

    let mut optimizer = AdamW::new(
        &[&image.main, &text.main],
        cfg.lr,
        cfg.weight_decay,
        cfg.beta1,
        cfg.beta2,
        cfg.eps,
    );
    optimizer.step = header.optimizer_step;
    for i in 0..optimizer.m.len() {
        let m = take(&format!("adam.m.{i}"))?;
        let v = take(&format!("adam.v.{i}"))?;
        if m.len() != optimizer.m[i].len() || v.len() != optimizer.v[i].len() {
            return Err(Error::Checkpoint(format!("optimizer slot {i} has wrong length")));
        }
        optimizer.m[i] = m;
        optimizer.v[i] = v;
    }
    let mut queue = |meta: &Option<QueueMeta>, name: &str| -> Result<Option<KeyQueue>> {
        meta.as_ref()
            .map(|m| KeyQueue::from_parts(m.capacity, m.dim, take(name)?, m.head, m.fill))
            .transpose()
    };
    let image_queue = queue(&header.image_queue, "queue.image")?;
    let text_queue = queue(&header.text_queue, "queue.text")?;

    Ok(TrainState {
        config: header.config,
        tokenizer: header.tokenizer,
        image,
        text,
        image_queue,
        text_queue,
        optimizer,
        step: header.step,
        epoch: header.epoch,
        batch_in_epoch: header.batch_in_epoch,
        epoch_loss_sum: header.epoch_loss_sum,
        classes: header.classes,
        best_val_auc: header.best_val_auc,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let f = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(f))
}

/// SHA-256 of a checkpoint file's bytes.
pub fn file_hash(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}
