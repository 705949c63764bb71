use rand::Rng;
use serde::{Deserialize, Serialize};

use super::preprocess::{resample_region, IMAGENET_STD};
use crate::error::{Error, Result};
use crate::tensor::Image;

/// Stochastic view policy for the two MoCo views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Crop area as a fraction of the image, sampled uniformly.
    pub scale_min: f64,
    pub scale_max: f64,
    pub flip_prob: f64,
    /// Additive brightness shift in raw intensity units, sampled from
    /// `[-brightness, brightness]`.
    pub brightness: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            scale_min: 0.8,
            scale_max: 1.0,
            flip_prob: 0.5,
            brightness: 0.1,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.scale_min && self.scale_min <= self.scale_max && self.scale_max <= 1.0) {
            return Err(Error::Config(format!(
                "crop scale range [{}, {}] must satisfy 0 < min <= max <= 1",
                self.scale_min, self.scale_max
            )));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) || !(self.brightness >= 0.0) {
            return Err(Error::Config("invalid flip probability or brightness".into()));
        }
        Ok(())
    }
}

/// One augmented copy of a preprocessed (standardized) image.
pub fn augment_view<R: Rng>(img: &Image, cfg: &AugmentConfig, rng: &mut R) -> Image {
    if !cfg.enabled {
        return img.clone();
    }
    let area = rng.gen_range(cfg.scale_min..=cfg.scale_max);
    let side = area.sqrt();
    let ch = side * img.height as f64;
    let cw = side * img.width as f64;
    let y0 = rng.gen_range(0.0..=(img.height as f64 - ch));
    let x0 = rng.gen_range(0.0..=(img.width as f64 - cw));
    let mut out = resample_region(img, y0, x0, ch, cw, img.height, img.width);
    if rng.gen_bool(cfg.flip_prob) {
        for y in 0..out.height {
            for x in 0..out.width / 2 {
                for c in 0..out.channels {
                    let a = out.at(y, x, c);
                    let xr = out.width - 1 - x;
                    *out.at_mut(y, x, c) = out.at(y, xr, c);
                    *out.at_mut(y, xr, c) = a;
                }
            }
        }
    }
    let delta = if cfg.brightness > 0.0 {
        rng.gen_range(-cfg.brightness..=cfg.brightness)
    } else {
        0.0
    };
    if delta != 0.0 {
        for y in 0..out.height {
            for x in 0..out.width {
                for c in 0..out.channels {
                    let std = IMAGENET_STD.get(c).copied().unwrap_or(1.0);
                    *out.at_mut(y, x, c) += delta / std;
                }
            }
        }
    }
    out
}

/// Two independent augmentations of the same image.
pub fn augment_views<R: Rng>(img: &Image, cfg: &AugmentConfig, rng: &mut R) -> (Image, Image) {
    let a = augment_view(img, cfg, rng);
    let b = augment_view(img, cfg, rng);
    (a, b)
}
