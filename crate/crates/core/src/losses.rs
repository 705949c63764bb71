//! Contrastive objectives and their gradients w.r.t. the unit embeddings.
//!
//! All softmax cross-entropies subtract the row maximum before
//! exponentiating. Keys, queue negatives and momentum targets enter only as
//! constants; gradients are returned for the query-side embeddings alone.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, Mat};

pub const DEFAULT_TEMPERATURE: f64 = 0.07;
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Composite-loss configuration identifiers.
///
/// * `A`: image-text contrastive + image queue InfoNCE
/// * `B`: image-text contrastive + momentum text consistency
/// * `C`: image-text contrastive + momentum image consistency
/// * `D`: all of the above
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossConfigId {
    A,
    B,
    C,
    D,
}

impl LossConfigId {
    pub const ALL: [LossConfigId; 4] = [LossConfigId::A, LossConfigId::B, LossConfigId::C, LossConfigId::D];

    pub fn label(self) -> &'static str {
        match self {
            LossConfigId::A => "A: MoCo Loss + Image-Text Contrastive Loss",
            LossConfigId::B => "B: Contrastive Loss + Momentum Encoder Text Loss",
            LossConfigId::C => "C: Contrastive Loss + Momentum Encoder Image Loss",
            LossConfigId::D => "D: Full Losses Integration",
        }
    }
}

impl fmt::Display for LossConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LossConfigId::A => "A",
            LossConfigId::B => "B",
            LossConfigId::C => "C",
            LossConfigId::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for LossConfigId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(LossConfigId::A),
            "B" => Ok(LossConfigId::B),
            "C" => Ok(LossConfigId::C),
            "D" => Ok(LossConfigId::D),
            _ => Err(Error::Config(format!(
                "unknown loss configuration `{s}` (valid: A, B, C, D)"
            ))),
        }
    }
}

/// Where the momentum-consistency terms draw their negatives from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyNegatives {
    /// Other rows of the same batch (no queue).
    #[default]
    InBatch,
    /// A per-modality key queue.
    Queue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub id: LossConfigId,
    pub lambda: f64,
    pub tau_clip: f64,
    pub tau_moco: f64,
    #[serde(default)]
    pub consistency_negatives: ConsistencyNegatives,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self::new(LossConfigId::A)
    }
}

impl LossConfig {
    pub fn new(id: LossConfigId) -> Self {
        Self {
            id,
            lambda: DEFAULT_LAMBDA,
            tau_clip: DEFAULT_TEMPERATURE,
            tau_moco: DEFAULT_TEMPERATURE,
            consistency_negatives: ConsistencyNegatives::InBatch,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        for (name, t) in [("tau_clip", self.tau_clip), ("tau_moco", self.tau_moco)] {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {t}")));
            }
        }
        Ok(())
    }

    /// Queue InfoNCE on the image modality.
    pub fn use_image_queue(&self) -> bool {
        matches!(self.id, LossConfigId::A | LossConfigId::D)
    }

    /// A text key queue is only needed when the text consistency term is
    /// queue-based.
    pub fn use_text_queue(&self) -> bool {
        self.use_momentum_text_consistency() && self.consistency_negatives == ConsistencyNegatives::Queue
    }

    pub fn use_momentum_image_consistency(&self) -> bool {
        matches!(self.id, LossConfigId::C | LossConfigId::D)
    }

    pub fn use_momentum_text_consistency(&self) -> bool {
        matches!(self.id, LossConfigId::B | LossConfigId::D)
    }
}

/// Per-term loss values of one batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub l_con: f64,
    pub l_moco: f64,
    pub l_mom_img: f64,
    pub l_mom_txt: f64,
}

/// Raw term values before configuration masking.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub l_con: f64,
    pub l_moco: f64,
    pub l_mom_img: f64,
    pub l_mom_txt: f64,
}

/// `total = l_con + λ · (active auxiliary terms)`; inactive terms are
/// reported as zero.
pub fn composite_loss(cfg: &LossConfig, parts: LossParts) -> Result<LossBreakdown> {
    cfg.validate()?;
    let l_moco = if cfg.use_image_queue() { parts.l_moco } else { 0.0 };
    let l_mom_img = if cfg.use_momentum_image_consistency() { parts.l_mom_img } else { 0.0 };
    let l_mom_txt = if cfg.use_momentum_text_consistency() { parts.l_mom_txt } else { 0.0 };
    Ok(LossBreakdown {
        total: parts.l_con + cfg.lambda * (l_moco + l_mom_img + l_mom_txt),
        l_con: parts.l_con,
        l_moco,
        l_mom_img,
        l_mom_txt,
    })
}

/// Stable `−log softmax(logits)[target]` and its gradient
/// `softmax(logits) − onehot(target)`.
pub fn cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[target] - max);
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[target] -= 1.0;
    (loss, grad)
}

fn check_temperature(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config(format!("temperature must be > 0, got {tau}")));
    }
    Ok(())
}

fn check_aligned(a: &Mat, b: &Mat, what: &str) -> Result<()> {
    if a.rows != b.rows {
        return Err(Error::Contract(format!(
            "{what}: batch sizes differ ({} vs {})",
            a.rows, b.rows
        )));
    }
    if a.cols != b.cols {
        return Err(Error::Contract(format!(
            "{what}: embedding dimensions differ ({} vs {})",
            a.cols, b.cols
        )));
    }
    if a.rows == 0 {
        return Err(Error::Contract(format!("{what}: empty batch")));
    }
    Ok(())
}

/// Symmetric cross-entropy over an `N × N` logit matrix whose diagonal holds
/// the matched pairs. Returns the loss and `∂loss/∂logits`.
pub fn clip_loss_from_logits(logits: &Mat) -> (f64, Mat) {
    let n = logits.rows;
    let scale = 0.5 / n as f64;
    let mut grad = Mat::zeros(n, n);
    let mut loss = 0.0;
    for i in 0..n {
        let (l, g) = cross_entropy(logits.row(i), i);
        loss += l;
        for (j, gv) in g.into_iter().enumerate() {
            grad.data[i * n + j] += scale * gv;
        }
    }
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| logits.get(i, j)).collect();
        let (l, g) = cross_entropy(&col, j);
        loss += l;
        for (i, gv) in g.into_iter().enumerate() {
            grad.data[i * n + j] += scale * gv;
        }
    }
    (loss * scale, grad)
}

#[derive(Clone, Debug)]
pub struct ClipGrad {
    pub loss: f64,
    pub d_img: Mat,
    pub d_txt: Mat,
}

/// CLIP image-text loss and gradients for both modalities.
pub fn clip_contrastive_with_grad(img: &Mat, txt: &Mat, tau: f64) -> Result<ClipGrad> {
    check_temperature(tau)?;
    check_aligned(img, txt, "clip_contrastive")?;
    let mut logits = img.matmul_t(txt);
    logits.scale(1.0 / tau);
    let (loss, mut d_logits) = clip_loss_from_logits(&logits);
    d_logits.scale(1.0 / tau);
    let d_img = d_logits.matmul(txt);
    let d_txt = d_logits.t_matmul(img);
    Ok(ClipGrad { loss, d_img, d_txt })
}

pub fn clip_contrastive(img: &Mat, txt: &Mat, tau: f64) -> Result<f64> {
    clip_contrastive_with_grad(img, txt, tau).map(|g| g.loss)
}

/// Mean over rows of the InfoNCE cross-entropy with the positive logit at
/// index 0 of each row's logit vector.
pub fn info_nce_from_logits(positive: &[f64], negatives: &Mat) -> f64 {
    let mut total = 0.0;
    for (i, &p) in positive.iter().enumerate() {
        let mut row = Vec::with_capacity(1 + negatives.cols);
        row.push(p);
        row.extend_from_slice(negatives.row(i));
        total += cross_entropy(&row, 0).0;
    }
    total / positive.len() as f64
}

/// Queue InfoNCE: positive `q_i · k⁺_i`, negatives every row of
/// `queue_negs`. Returns the loss and `∂loss/∂q`.
pub fn info_nce_with_grad(q: &Mat, k_pos: &Mat, queue_negs: &Mat, tau: f64) -> Result<(f64, Mat)> {
    check_temperature(tau)?;
    check_aligned(q, k_pos, "info_nce")?;
    if queue_negs.rows > 0 && queue_negs.cols != q.cols {
        return Err(Error::Contract(format!(
            "info_nce: query dimension {} does not match negatives {}",
            q.cols, queue_negs.cols
        )));
    }
    let n = q.rows;
    let inv_tau = 1.0 / tau;
    let neg_logits = if queue_negs.rows > 0 {
        let mut l = q.matmul_t(queue_negs);
        l.scale(inv_tau);
        l
    } else {
        Mat::zeros(n, 0)
    };
    let mut loss = 0.0;
    let mut d_q = Mat::zeros(n, q.cols);
    let scale = inv_tau / n as f64;
    for i in 0..n {
        let mut row = Vec::with_capacity(1 + queue_negs.rows);
        row.push(dot(q.row(i), k_pos.row(i)) * inv_tau);
        row.extend_from_slice(neg_logits.row(i));
        let (l, g) = cross_entropy(&row, 0);
        loss += l;
        let dq = d_q.row_mut(i);
        for (d, k) in dq.iter_mut().zip(k_pos.row(i)) {
            *d += scale * g[0] * k;
        }
        for (j, gj) in g[1..].iter().enumerate() {
            for (d, k) in dq.iter_mut().zip(queue_negs.row(j)) {
                *d += scale * gj * k;
            }
        }
    }
    Ok((loss / n as f64, d_q))
}

pub fn info_nce(q: &Mat, k_pos: &Mat, queue_negs: &Mat, tau: f64) -> Result<f64> {
    info_nce_with_grad(q, k_pos, queue_negs, tau).map(|(l, _)| l)
}

/// In-batch InfoNCE against momentum keys of the same modality: row `i`'s
/// positive is `k_mom[i]`, its negatives the other rows of `k_mom`.
pub fn momentum_consistency_with_grad(q_main: &Mat, k_mom: &Mat, tau: f64) -> Result<(f64, Mat)> {
    check_temperature(tau)?;
    check_aligned(q_main, k_mom, "momentum_consistency")?;
    let n = q_main.rows;
    let mut logits = q_main.matmul_t(k_mom);
    logits.scale(1.0 / tau);
    let mut loss = 0.0;
    let mut d_logits = Mat::zeros(n, n);
    for i in 0..n {
        let (l, g) = cross_entropy(logits.row(i), i);
        loss += l;
        d_logits.row_mut(i).copy_from_slice(&g);
    }
    d_logits.scale(1.0 / (n as f64 * tau));
    Ok((loss / n as f64, d_logits.matmul(k_mom)))
}

pub fn momentum_consistency(q_main: &Mat, k_mom: &Mat, tau: f64) -> Result<f64> {
    momentum_consistency_with_grad(q_main, k_mom, tau).map(|(l, _)| l)
}
