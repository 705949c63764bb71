use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::optim::AdamW;
use crate::data::{augment_views, Dataset};
use crate::domain::RngState;
use crate::encoders::{
    Encoder, EncoderPair, EncoderParams, Gradients, ImageEncoder, TextEncoder, TokenSequence, Tokenizer,
};
use crate::error::{Error, Result};
use crate::losses::{
    clip_contrastive_with_grad, composite_loss, info_nce_with_grad, momentum_consistency_with_grad,
    ConsistencyNegatives, LossBreakdown, LossConfig, LossParts,
};
use crate::queue::KeyQueue;
use crate::tensor::{Image, Mat};

/// Whether the run keeps an image key queue: for the MoCo term, or for a
/// queue-based image consistency term.
pub fn needs_image_queue(cfg: &LossConfig) -> bool {
    cfg.use_image_queue()
        || (cfg.use_momentum_image_consistency() && cfg.consistency_negatives == ConsistencyNegatives::Queue)
}

pub fn needs_text_queue(cfg: &LossConfig) -> bool {
    cfg.use_text_queue()
}

/// Loss terms, main-encoder gradients and the momentum keys of one batch.
#[derive(Clone, Debug)]
pub struct LossEval {
    pub breakdown: LossBreakdown,
    pub grad_image: Gradients,
    pub grad_text: Gradients,
    pub keys_image: Option<Mat>,
    pub keys_text: Option<Mat>,
}

fn add_scaled(acc: &mut Mat, d: &Mat, k: f64) {
    for (a, b) in acc.data.iter_mut().zip(&d.data) {
        *a += k * b;
    }
}

/// Composite loss of one batch and its gradient w.r.t. both main encoders.
/// Momentum keys and queue contents are constants.
#[allow(clippy::too_many_arguments)]
pub fn loss_and_gradients(
    cfg: &LossConfig,
    image: &EncoderPair,
    text: &EncoderPair,
    image_queue: Option<&KeyQueue>,
    text_queue: Option<&KeyQueue>,
    view1: &[Image],
    view2: &[Image],
    tokens: &[TokenSequence],
) -> Result<LossEval> {
    let (q_img, img_cache) = ImageEncoder.forward(&image.main, view1)?;
    let (q_txt, txt_cache) = TextEncoder.forward(&text.main, tokens)?;
    let clip = clip_contrastive_with_grad(&q_img, &q_txt, cfg.tau_clip)?;
    let mut d_img = clip.d_img;
    let mut d_txt = clip.d_txt;
    let mut parts = LossParts {
        l_con: clip.loss,
        ..LossParts::default()
    };
    let queue_mode = cfg.consistency_negatives == ConsistencyNegatives::Queue;

    let want_img_keys = needs_image_queue(cfg) || cfg.use_momentum_image_consistency();
    let keys_image = if want_img_keys {
        Some(ImageEncoder.encode(&image.momentum, view2)?)
    } else {
        None
    };
    let keys_text = if cfg.use_momentum_text_consistency() {
        Some(TextEncoder.encode(&text.momentum, tokens)?)
    } else {
        None
    };
    let queue_negs = |q: Option<&KeyQueue>, what: &str| -> Result<Mat> {
        q.map(KeyQueue::negatives)
            .ok_or_else(|| Error::Contract(format!("{what} queue required by the loss configuration")))
    };

    if cfg.use_image_queue() {
        let k = keys_image.as_ref().expect("image keys computed");
        let (l, d) = info_nce_with_grad(&q_img, k, &queue_negs(image_queue, "image")?, cfg.tau_moco)?;
        parts.l_moco = l;
        add_scaled(&mut d_img, &d, cfg.lambda);
    }
    if cfg.use_momentum_image_consistency() {
        let k = keys_image.as_ref().expect("image keys computed");
        let (l, d) = if queue_mode {
            info_nce_with_grad(&q_img, k, &queue_negs(image_queue, "image")?, cfg.tau_moco)?
        } else {
            momentum_consistency_with_grad(&q_img, k, cfg.tau_moco)?
        };
        parts.l_mom_img = l;
        add_scaled(&mut d_img, &d, cfg.lambda);
    }
    if cfg.use_momentum_text_consistency() {
        let k = keys_text.as_ref().expect("text keys computed");
        let (l, d) = if queue_mode {
            info_nce_with_grad(&q_txt, k, &queue_negs(text_queue, "text")?, cfg.tau_moco)?
        } else {
            momentum_consistency_with_grad(&q_txt, k, cfg.tau_moco)?
        };
        parts.l_mom_txt = l;
        add_scaled(&mut d_txt, &d, cfg.lambda);
    }

    let breakdown = composite_loss(cfg, parts)?;
    let grad_image = ImageEncoder.backward(&image.main, &img_cache, &d_img)?;
    let grad_text = TextEncoder.backward(&text.main, &txt_cache, &d_txt)?;
    Ok(LossEval {
        breakdown,
        grad_image,
        grad_text,
        keys_image: keys_image.filter(|_| needs_image_queue(cfg)),
        keys_text: keys_text.filter(|_| needs_text_queue(cfg)),
    })
}

/// Everything that evolves during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub config: TrainConfig,
    pub tokenizer: Tokenizer,
    pub image: EncoderPair,
    pub text: EncoderPair,
    pub image_queue: Option<KeyQueue>,
    pub text_queue: Option<KeyQueue>,
    pub optimizer: AdamW,
    /// Optimizer steps taken so far.
    pub step: u64,
    /// Epoch currently in progress and the next batch within it.
    pub epoch: usize,
    pub batch_in_epoch: usize,
    /// Sum of step losses so far in the current epoch.
    pub epoch_loss_sum: f64,
    /// Classes scored in zero-shot validation.
    pub classes: Vec<String>,
    pub best_val_auc: Option<f64>,
}

impl TrainState {
    /// Fresh state: main encoders drawn from the `init` stream, momentum
    /// twins cloned from them, empty queues.
    pub fn new(config: TrainConfig, tokenizer: Tokenizer, classes: Vec<String>) -> Result<Self> {
        config.validate()?;
        let mut rng = RngState::new(config.seed, "init").rng();
        let image_main = EncoderParams::init(config.model.image_arch(), &mut rng)?;
        let text_main = EncoderParams::init(config.model.text_arch(tokenizer.vocab_size()), &mut rng)?;
        if tokenizer.max_len() != config.model.max_len {
            return Err(Error::Config(format!(
                "tokenizer max_len {} differs from model max_len {}",
                tokenizer.max_len(),
                config.model.max_len
            )));
        }
        let image = EncoderPair::new(image_main, config.momentum)?;
        let text = EncoderPair::new(text_main, config.momentum)?;
        let d = config.model.embed_dim;
        let image_queue = needs_image_queue(&config.loss)
            .then(|| KeyQueue::new(config.queue_capacity, d))
            .transpose()?;
        let text_queue = needs_text_queue(&config.loss)
            .then(|| KeyQueue::new(config.queue_capacity, d))
            .transpose()?;
        let optimizer = AdamW::new(
            &[&image.main, &text.main],
            config.lr,
            config.weight_decay,
            config.beta1,
            config.beta2,
            config.eps,
        );
        Ok(Self {
            config,
            tokenizer,
            image,
            text,
            image_queue,
            text_queue,
            optimizer,
            step: 0,
            epoch: 0,
            batch_in_epoch: 0,
            epoch_loss_sum: 0.0,
            classes,
            best_val_auc: None,
        })
    }

    /// One optimizer step on the samples `batch` of `data`:
    /// augment, embed, composite loss, AdamW on the main encoders, EMA on
    /// both twins, enqueue momentum keys.
    pub fn train_step(&mut self, data: &Dataset, batch: &[usize]) -> Result<LossBreakdown> {
        let mut rng = RngState::new(self.config.seed, "augment")
            .derive(format!("step/{}", self.step))
            .rng();
        let mut view1 = Vec::with_capacity(batch.len());
        let mut view2 = Vec::with_capacity(batch.len());
        for &i in batch {
            let (a, b) = augment_views(&data.samples[i].image, &self.config.augment, &mut rng);
            view1.push(a);
            view2.push(b);
        }
        let tokens = data.token_batch(batch);
        let eval = loss_and_gradients(
            &self.config.loss,
            &self.image,
            &self.text,
            self.image_queue.as_ref(),
            self.text_queue.as_ref(),
            &view1,
            &view2,
            &tokens,
        )?;
        let b = eval.breakdown;
        let gi = eval.grad_image.norm();
        let gt = eval.grad_text.norm();
        if ![b.total, b.l_con, b.l_moco, b.l_mom_img, b.l_mom_txt, gi, gt]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFiniteLoss {
                step: self.step,
                terms: format!(
                    "total={} l_con={} l_moco={} l_mom_img={} l_mom_txt={}",
                    b.total, b.l_con, b.l_moco, b.l_mom_img, b.l_mom_txt
                ),
                grad_norms: format!("image={gi} text={gt}"),
            });
        }
        self.optimizer.update(
            &mut [&mut self.image.main, &mut self.text.main],
            &[&eval.grad_image, &eval.grad_text],
        )?;
        self.image.momentum_update()?;
        self.text.momentum_update()?;
        if let (Some(q), Some(k)) = (self.image_queue.as_mut(), eval.keys_image.as_ref()) {
            q.enqueue(k)?;
        }
        if let (Some(q), Some(k)) = (self.text_queue.as_mut(), eval.keys_text.as_ref()) {
            q.enqueue(k)?;
        }
        self.step += 1;
        Ok(b)
    }

    pub fn queue_fill(&self) -> usize {
        self.image_queue.as_ref().map_or(0, KeyQueue::fill)
    }
}
