#![allow(dead_code)]

use mococlip::domain::{l2_normalize, RngState};
use mococlip::encoders::{Architecture, EncoderPair, EncoderParams, ImageArch, TextArch, TokenSequence, Tokenizer};
use mococlip::losses::{LossConfig, LossConfigId};
use mococlip::queue::KeyQueue;
use mococlip::tensor::{Image, Mat};
use mococlip::trainer::{loss_and_gradients, needs_image_queue, needs_text_queue};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const GRAD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Denominator floor for the relative error, so that entries whose true
/// gradient is (near) zero are judged on absolute error.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn image_arch() -> Architecture {
    Architecture::Image(ImageArch {
        image_size: 8,
        channels: 3,
        patch_size: 4,
        patch_proj: 2,
        hidden: 4,
        embed_dim: 4,
    })
}

pub fn tokenizer() -> Tokenizer {
    let words = ["heart", "lung", "fluid", "mass", "no", "evidence", "of", "with", "seen", "large", "small", "base"];
    Tokenizer::from_vocab(words.iter().map(|w| w.to_string()).collect(), 8)
}

pub fn text_arch(tok: &Tokenizer) -> Architecture {
    Architecture::Text(TextArch {
        vocab_size: tok.vocab_size(),
        token_dim: 3,
        hidden: 4,
        embed_dim: 4,
        max_len: tok.max_len(),
    })
}

/// A random instance of the composite objective over toy encoders.
pub struct GradInstance {
    pub cfg: LossConfig,
    pub image: EncoderPair,
    pub text: EncoderPair,
    pub image_queue: Option<KeyQueue>,
    pub text_queue: Option<KeyQueue>,
    pub view1: Vec<Image>,
    pub view2: Vec<Image>,
    pub tokens: Vec<TokenSequence>,
}

fn perturbed(p: &EncoderParams, rng: &mut ChaCha8Rng, scale: f64) -> EncoderParams {
    let mut q = p.clone();
    for t in &mut q.tensors {
        for v in &mut t.data {
            *v += rng.gen_range(-scale..scale);
        }
    }
    q
}

fn random_image(rng: &mut ChaCha8Rng) -> Image {
    Image::new(8, 8, 3, (0..192).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
}

fn random_keys(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Mat {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| l2_normalize(&(0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap().values)
        .collect();
    Mat::from_rows(&rows).unwrap()
}

pub fn grad_instance(cfg: LossConfig, seed: u64) -> GradInstance {
    let mut rng = RngState::new(seed, "gradcheck").rng();
    let tok = tokenizer();
    // Scaled-up init so the toy objective is far from flat.
    let mut image_main = EncoderParams::init(image_arch(), &mut rng).unwrap();
    let mut text_main = EncoderParams::init(text_arch(&tok), &mut rng).unwrap();
    for t in image_main.tensors.iter_mut().chain(text_main.tensors.iter_mut()) {
        t.data.iter_mut().for_each(|v| *v *= 2.0);
    }
    let image = EncoderPair::from_parts(image_main.clone(), perturbed(&image_main, &mut rng, 0.2), 0.9).unwrap();
    let text = EncoderPair::from_parts(text_main.clone(), perturbed(&text_main, &mut rng, 0.2), 0.9).unwrap();
    let n = 4;
    let view1: Vec<Image> = (0..n).map(|_| random_image(&mut rng)).collect();
    let view2: Vec<Image> = (0..n).map(|_| random_image(&mut rng)).collect();
    let vocab = tok.words().to_vec();
    let tokens: Vec<TokenSequence> = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=6);
            let text: Vec<&str> = (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].as_str()).collect();
            tok.tokenize(&text.join(" ")).unwrap()
        })
        .collect();
    let mut queue = |needed: bool| {
        needed.then(|| {
            let mut q = KeyQueue::new(16, 4).unwrap();
            q.enqueue(&random_keys(&mut rng, 6, 4)).unwrap();
            q
        })
    };
    let image_queue = queue(needs_image_queue(&cfg));
    let text_queue = queue(needs_text_queue(&cfg));
    GradInstance {
        cfg,
        image,
        text,
        image_queue,
        text_queue,
        view1,
        view2,
        tokens,
    }
}

impl GradInstance {
    pub fn total(&self, image_main: &EncoderParams, text_main: &EncoderParams) -> f64 {
        let mut image = self.image.clone();
        let mut text = self.text.clone();
        image.main = image_main.clone();
        text.main = text_main.clone();
        loss_and_gradients(
            &self.cfg,
            &image,
            &text,
            self.image_queue.as_ref(),
            self.text_queue.as_ref(),
            &self.view1,
            &self.view2,
            &self.tokens,
        )
        .unwrap()
        .breakdown
        .total
    }

    pub fn num_params(&self) -> usize {
        self.image.main.num_params() + self.text.main.num_params()
    }

    /// Max relative error between analytic and central-difference
    /// gradients over every main-encoder parameter.
    pub fn max_relative_error(&self) -> f64 {
        let eval = loss_and_gradients(
            &self.cfg,
            &self.image,
            &self.text,
            self.image_queue.as_ref(),
            self.text_queue.as_ref(),
            &self.view1,
            &self.view2,
            &self.tokens,
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        let analytic = [eval.grad_image.flatten(), eval.grad_text.flatten()];
        for (which, grads) in analytic.iter().enumerate() {
            let base = if which == 0 { self.image.main.flatten() } else { self.text.main.flatten() };
            for (i, &a) in grads.iter().enumerate() {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[i] += GRAD_STEP;
                minus[i] -= GRAD_STEP;
                let (mut ip, mut tp) = (self.image.main.clone(), self.text.main.clone());
                let (mut im, mut tm) = (self.image.main.clone(), self.text.main.clone());
                if which == 0 {
                    ip.set_flat(&plus).unwrap();
                    im.set_flat(&minus).unwrap();
                } else {
                    tp.set_flat(&plus).unwrap();
                    tm.set_flat(&minus).unwrap();
                }
                let numeric = (self.total(&ip, &tp) - self.total(&im, &tm)) / (2.0 * GRAD_STEP);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
                worst = worst.max(rel);
            }
        }
        worst
    }
}

pub fn config(id: LossConfigId) -> LossConfig {
    LossConfig::new(id)
}

/// Synthetic toy benchmark of `n` images with four findings, split and
/// tokenized under `cfg`.
pub fn toy_prepared(n: usize, data_seed: u64, cfg: &mococlip::trainer::TrainConfig) -> mococlip::trainer::Prepared {
    use mococlip::data::{generate_synthetic, Manifest, ManifestRow, SyntheticConfig};
    let syn = SyntheticConfig {
        n,
        pathologies: 4,
        seed: data_seed,
        ..SyntheticConfig::default()
    };
    let (set, samples) = generate_synthetic(&syn).unwrap();
    let rows = samples
        .iter()
        .map(|s| ManifestRow {
            path: s.id.clone(),
            labels: s.labels.clone(),
            patient: None,
        })
        .collect();
    let manifest = Manifest::new(set, rows).unwrap();
    let images = samples.into_iter().map(|s| s.image).collect();
    mococlip::trainer::prepare(&manifest, images, cfg, &mococlip::reports::TemplateTable::default_table()).unwrap()
}

/// A small model that keeps trainer tests fast.
pub fn small_model() -> mococlip::trainer::ModelConfig {
    mococlip::trainer::ModelConfig {
        image_size: 16,
        patch_size: 8,
        patch_proj: 8,
        image_hidden: 16,
        embed_dim: 16,
        token_dim: 8,
        text_hidden: 16,
        max_len: 48,
    }
}
