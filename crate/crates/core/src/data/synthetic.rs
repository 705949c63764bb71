//! Desk-scale stand-in for a chest X-ray corpus.
//!
//! Every finding owns a fixed slot on a 4×4 grid (left half, mirrored onto
//! the right half at random) and a shape family. An image carrying the
//! finding gets that primitive drawn with jittered centre, size and
//! contrast on top of a smooth noise background.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, ManifestRow};
use super::preprocess::{bilinear_resize, save_gray_png};
use crate::domain::{LabelVector, PathologySet, RngState, NIH_PATHOLOGIES, NO_FINDING};
use crate::error::{Error, Result};
use crate::tensor::Image;

pub const DEFAULT_RAW_SIZE: usize = 64;
pub const DEFAULT_PREVALENCE: f64 = 0.2;
pub const MIN_SAMPLES: usize = 10;
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    /// Number of leading NIH classes to use, 2..=15. Findings are the first
    /// `min(k, 14)` disease labels; "No Finding" is always part of the
    /// vocabulary, so 15 selects the full label set.
    pub pathologies: usize,
    pub raw_size: usize,
    pub prevalence: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            pathologies: 4,
            raw_size: DEFAULT_RAW_SIZE,
            prevalence: DEFAULT_PREVALENCE,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "n = {} below minimum {MIN_SAMPLES}",
                self.n
            )));
        }
        if !(2..=15).contains(&self.pathologies) {
            return Err(Error::Config(format!(
                "pathology count {} outside 2..=15",
                self.pathologies
            )));
        }
        if self.raw_size < 16 {
            return Err(Error::Config(format!("raw size {} below 16", self.raw_size)));
        }
        if !(0.0..=1.0).contains(&self.prevalence) {
            return Err(Error::Config(format!(
                "prevalence {} outside [0, 1]",
                self.prevalence
            )));
        }
        Ok(())
    }

    /// Findings drawn by the generator, in NIH order.
    pub fn findings(&self) -> Vec<&'static str> {
        NIH_PATHOLOGIES[..self.pathologies.min(14)].to_vec()
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSample {
    pub id: String,
    pub image: Image,
    pub labels: LabelVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Shape {
    Blob,
    Ring,
}

/// Grid slot and shape family of the finding at NIH index `i`.
fn primitive_for(i: usize) -> (usize, usize, Shape) {
    let slot = i % 8;
    let shape = if i < 8 { Shape::Blob } else { Shape::Ring };
    (slot / 2, slot % 2, shape)
}

fn smooth_noise(size: usize, rng: &mut ChaCha8Rng) -> Image {
    let coarse = 9;
    let data = (0..coarse * coarse).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let grid = Image::new(coarse, coarse, 1, data).expect("coarse grid");
    bilinear_resize(&grid, size, size)
}

fn draw_primitive(img: &mut Image, cy: f64, cx: f64, radius: f64, contrast: f64, shape: Shape) {
    let size = img.height;
    for y in 0..size {
        for x in 0..img.width {
            let dy = y as f64 + 0.5 - cy;
            let dx = x as f64 + 0.5 - cx;
            let d = (dy * dy + dx * dx).sqrt();
            let v = match shape {
                Shape::Blob => (-(d * d) / (2.0 * (radius * 0.6).powi(2))).exp(),
                Shape::Ring => {
                    let t = (d - radius) / (radius * 0.25);
                    (-(t * t) / 2.0).exp()
                }
            };
            *img.at_mut(y, x, 0) += contrast * v;
        }
    }
}

fn render(findings: &[usize], size: usize, rng: &mut ChaCha8Rng) -> Image {
    let noise = smooth_noise(size, rng);
    let mut img = Image::filled(size, size, 1, 0.0);
    for y in 0..size {
        for x in 0..size {
            let fine: f64 = rng.gen_range(-0.03..0.03);
            *img.at_mut(y, x, 0) = 0.35 + 0.08 * noise.at(y, x, 0) + fine;
        }
    }
    let cell = size as f64 / 4.0;
    for &i in findings {
        let (row, col, shape) = primitive_for(i);
        let jitter = cell * 0.12;
        let cy = (row as f64 + 0.5) * cell + rng.gen_range(-jitter..jitter);
        let mut cx = (col as f64 + 0.5) * cell + rng.gen_range(-jitter..jitter);
        if rng.gen_bool(0.5) {
            cx = size as f64 - cx;
        }
        let radius = cell * rng.gen_range(0.28..0.38);
        let contrast = rng.gen_range(0.35..0.5);
        draw_primitive(&mut img, cy, cx, radius, contrast, shape);
    }
    img.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    img
}

/// Generate samples in memory. Labels and pixels come from the `data`
/// stream of `cfg.seed`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(PathologySet, Vec<SyntheticSample>)> {
    cfg.validate()?;
    let set = PathologySet::nih();
    let findings: Vec<usize> = (0..cfg.pathologies.min(14)).collect();
    let mut rng = RngState::new(cfg.seed, "data").rng();
    let mut samples = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let active: Vec<usize> = findings
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(cfg.prevalence))
            .collect();
        let names: Vec<&str> = if active.is_empty() {
            vec![NO_FINDING]
        } else {
            active.iter().map(|&j| NIH_PATHOLOGIES[j]).collect()
        };
        let labels = set.make_label_vector(&names)?;
        let image = render(&active, cfg.raw_size, &mut rng);
        samples.push(SyntheticSample {
            id: format!("{:08}_000.png", i + 1),
            image,
            labels,
        });
    }
    Ok((set, samples))
}

/// Generate, write PNGs and `manifest.csv` into `out_dir`, return the
/// manifest path.
pub fn write_synthetic_dataset(cfg: &SyntheticConfig, out_dir: &Path) -> Result<(PathBuf, Manifest)> {
    let (set, samples) = generate_synthetic(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        save_gray_png(&s.image, &out_dir.join(&s.id))?;
        rows.push(ManifestRow {
            path: s.id,
            labels: s.labels,
            patient: None,
        });
    }
    let manifest = Manifest::new(set, rows)?;
    let path = out_dir.join(MANIFEST_FILE);
    manifest.save(&path)?;
    Ok((path, manifest))
}
