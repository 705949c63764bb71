use serde::{Deserialize, Serialize};

use crate::data::{AugmentConfig, SplitSpec, TOY_INPUT_SIZE};
use crate::encoders::{Architecture, ImageArch, TextArch, Tokenizer};
use crate::error::{Error, Result};
use crate::inference::DEFAULT_INFERENCE_TEMPERATURE;
use crate::losses::LossConfig;
use crate::queue::DEFAULT_TOY_CAPACITY;

pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_EPOCHS: usize = 20;
pub const DEFAULT_LR: f64 = 1e-4;
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-4;
pub const DEFAULT_MOMENTUM: f64 = 0.999;

/// Layer sizes of the toy encoders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub patch_proj: usize,
    pub image_hidden: usize,
    pub embed_dim: usize,
    pub token_dim: usize,
    pub text_hidden: usize,
    pub max_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_size: TOY_INPUT_SIZE,
            patch_size: 8,
            patch_proj: 16,
            image_hidden: 64,
            embed_dim: 64,
            token_dim: 32,
            text_hidden: 64,
            max_len: Tokenizer::DEFAULT_MAX_LEN,
        }
    }
}

impl ModelConfig {
    pub fn image_arch(&self) -> Architecture {
        Architecture::Image(ImageArch {
            image_size: self.image_size,
            channels: 3,
            patch_size: self.patch_size,
            patch_proj: self.patch_proj,
            hidden: self.image_hidden,
            embed_dim: self.embed_dim,
        })
    }

    pub fn text_arch(&self, vocab_size: usize) -> Architecture {
        Architecture::Text(TextArch {
            vocab_size,
            token_dim: self.token_dim,
            hidden: self.text_hidden,
            embed_dim: self.embed_dim,
            max_len: self.max_len,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub momentum: f64,
    pub queue_capacity: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub augment: AugmentConfig,
    pub split: SplitSpec,
    pub inference_temperature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: DEFAULT_EPOCHS,
            lr: DEFAULT_LR,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: DEFAULT_MOMENTUM,
            queue_capacity: DEFAULT_TOY_CAPACITY,
            seed: 0,
            model: ModelConfig::default(),
            augment: AugmentConfig::default(),
            split: SplitSpec::default(),
            inference_temperature: DEFAULT_INFERENCE_TEMPERATURE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.augment.validate()?;
        self.split.validate()?;
        // The image-text term is always in-batch.
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size {} too small: in-batch contrastive terms need at least 2",
                self.batch_size
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("learning rate must be > 0 and weight decay >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("Adam betas must lie in [0, 1) and eps be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum coefficient {} outside [0, 1]",
                self.momentum
            )));
        }
        if self.queue_capacity == 0 {
            return Err(Error::Config("queue capacity must be positive".into()));
        }
        if !(self.inference_temperature > 0.0) {
            return Err(Error::Config("inference temperature must be > 0".into()));
        }
        self.model.image_arch().validate()?;
        self.model.text_arch(5).validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
