//! Toy image and text encoders sharing one embedding space, their
//! parameter containers, and the momentum (EMA) twin.
//!
//! Both encoders end in the same head: `tanh` hidden layer, linear
//! projection, then row-wise L2 normalization. Gradients are hand-derived;
//! every encoder exposes `forward` (returning a cache) and `backward`
//! (consuming the cache and the upstream gradient w.r.t. the unit
//! embeddings).

mod image;
mod text;
mod tokenizer;

pub use image::{encode_image, ImageArch, ImageCache, ImageEncoder};
pub use text::{encode_text, TextArch, TextCache, TextEncoder};
pub use tokenizer::{TokenSequence, Tokenizer, END_ID, PAD_ID, START_ID, UNK_ID};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Layer sizes of one encoder. Main and momentum copies share it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Image(ImageArch),
    Text(TextArch),
}

impl Architecture {
    /// `(name, shape, fan_in)` for every parameter tensor, in storage order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        let (mut layout, features, hidden, embed) = match self {
            Architecture::Image(a) => {
                let pd = a.patch_dim();
                (
                    vec![
                        ("patch.weight".to_string(), vec![pd, a.patch_proj], pd),
                        ("patch.bias".to_string(), vec![a.patch_proj], pd),
                    ],
                    a.num_patches() * a.patch_proj,
                    a.hidden,
                    a.embed_dim,
                )
            }
            Architecture::Text(a) => (
                vec![(
                    "token.embedding".to_string(),
                    vec![a.vocab_size, a.token_dim],
                    1,
                )],
                a.token_dim,
                a.hidden,
                a.embed_dim,
            ),
        };
        layout.push(("hidden.weight".into(), vec![features, hidden], features));
        layout.push(("hidden.bias".into(), vec![hidden], features));
        layout.push(("head.weight".into(), vec![hidden, embed], hidden));
        layout.push(("head.bias".into(), vec![embed], hidden));
        layout
    }

    pub fn embed_dim(&self) -> usize {
        match self {
            Architecture::Image(a) => a.embed_dim,
            Architecture::Text(a) => a.embed_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Architecture::Image(a) => a.validate(),
            Architecture::Text(a) => a.validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Named parameter arrays of one encoder plus its architecture descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub arch: Architecture,
    pub tensors: Vec<ParamTensor>,
}

impl EncoderParams {
    /// Uniform `±1/sqrt(fan_in)` initialization.
    pub fn init<R: Rng>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let tensors = arch
            .param_layout()
            .into_iter()
            .map(|(name, shape, fan_in)| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let len = shape.iter().product();
                let data = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
                ParamTensor { name, shape, data }
            })
            .collect();
        Ok(Self { arch, tensors })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let tensors = arch
            .param_layout()
            .into_iter()
            .map(|(name, shape, _)| {
                let len = shape.iter().product();
                ParamTensor {
                    name,
                    shape,
                    data: vec![0.0; len],
                }
            })
            .collect();
        Ok(Self { arch, tensors })
    }

    pub fn tensor(&self, name: &str) -> Result<&ParamTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    pub fn tensor_mut(&mut self, name: &str) -> Result<&mut ParamTensor> {
        self.tensors
            .iter_mut()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    pub(crate) fn matrix(&self, name: &str) -> Result<Mat> {
        let t = self.tensor(name)?;
        match t.shape.as_slice() {
            [r, c] => Mat::from_vec(*r, *c, t.data.clone()),
            _ => Err(Error::Config(format!("parameter `{name}` is not a matrix"))),
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Same architecture and identical tensor names/shapes.
    pub fn check_compatible(&self, other: &EncoderParams) -> Result<()> {
        if self.arch != other.arch || self.tensors.len() != other.tensors.len() {
            return Err(Error::Config("encoder architectures differ".into()));
        }
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            if a.name != b.name || a.shape != b.shape || a.data.len() != b.data.len() {
                return Err(Error::Config(format!(
                    "parameter `{}` shape {:?} does not match `{}` {:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
        }
        Ok(())
    }

    /// Check that the stored tensors agree with the architecture descriptor.
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let layout = self.arch.param_layout();
        if layout.len() != self.tensors.len() {
            return Err(Error::Config("parameter count does not match architecture".into()));
        }
        for ((name, shape, _), t) in layout.iter().zip(&self.tensors) {
            let len: usize = shape.iter().product();
            if &t.name != name || &t.shape != shape || t.data.len() != len {
                return Err(Error::Config(format!(
                    "parameter `{}` {:?} does not match architecture `{name}` {shape:?}",
                    t.name, t.shape
                )));
            }
        }
        Ok(())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::Contract("flat parameter length mismatch".into()));
        }
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.data.len();
            t.data.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Euclidean distance over all parameters.
    pub fn distance(&self, other: &EncoderParams) -> f64 {
        self.tensors
            .iter()
            .zip(&other.tensors)
            .flat_map(|(a, b)| a.data.iter().zip(&b.data))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tensors {
            h.update(t.name.as_bytes());
            for v in &t.data {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Gradients aligned with [`EncoderParams::tensors`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            tensors: params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flatten().copied().collect()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Batched differentiable encoder into the shared embedding space.
///
/// Output rows are unit-norm. A different backbone can be plugged in by
/// implementing this trait; losses, queue and inference only see the
/// embedding matrix.
pub trait Encoder {
    type Input;
    type Cache;

    fn forward(&self, params: &EncoderParams, batch: &[Self::Input]) -> Result<(Mat, Self::Cache)>;

    /// Parameter gradients given `d_embeddings`, the gradient of the
    /// objective w.r.t. the normalized output rows.
    fn backward(
        &self,
        params: &EncoderParams,
        cache: &Self::Cache,
        d_embeddings: &Mat,
    ) -> Result<Gradients>;

    fn encode(&self, params: &EncoderParams, batch: &[Self::Input]) -> Result<Mat> {
        self.forward(params, batch).map(|(e, _)| e)
    }
}

/// Main encoder and its momentum twin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderPair {
    pub main: EncoderParams,
    pub momentum: EncoderParams,
    m: f64,
}

impl EncoderPair {
    /// The momentum copy starts as an exact clone of `main`.
    pub fn new(main: EncoderParams, m: f64) -> Result<Self> {
        check_momentum(m)?;
        main.validate()?;
        Ok(Self {
            momentum: main.clone(),
            main,
            m,
        })
    }

    pub fn from_parts(main: EncoderParams, momentum: EncoderParams, m: f64) -> Result<Self> {
        check_momentum(m)?;
        main.validate()?;
        main.check_compatible(&momentum)?;
        Ok(Self { main, momentum, m })
    }

    pub fn coefficient(&self) -> f64 {
        self.m
    }

    pub fn set_coefficient(&mut self, m: f64) -> Result<()> {
        check_momentum(m)?;
        self.m = m;
        Ok(())
    }

    /// `θ_k ← m·θ_k + (1 − m)·θ_q`; the main encoder is untouched.
    pub fn momentum_update(&mut self) -> Result<()> {
        momentum_update(&mut self.momentum, &self.main, self.m)
    }
}

fn check_momentum(m: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Config(format!(
            "momentum coefficient {m} outside [0, 1]"
        )));
    }
    Ok(())
}

pub fn momentum_update(momentum: &mut EncoderParams, main: &EncoderParams, m: f64) -> Result<()> {
    check_momentum(m)?;
    momentum.check_compatible(main)?;
    let one_minus = 1.0 - m;
    for (k, q) in momentum.tensors.iter_mut().zip(&main.tensors) {
        for (kv, qv) in k.data.iter_mut().zip(&q.data) {
            *kv = m * *kv + one_minus * qv;
        }
    }
    Ok(())
}

/// Cache of the shared `tanh → linear → normalize` head.
#[derive(Clone, Debug)]
pub(crate) struct HeadCache {
    pub input: Mat,
    pub hidden: Mat,
    pub norms: Vec<f64>,
    pub embeddings: Mat,
}

pub(crate) fn head_forward(params: &EncoderParams, input: Mat) -> Result<HeadCache> {
    let wh = params.matrix("hidden.weight")?;
    let bh = &params.tensor("hidden.bias")?.data;
    let wo = params.matrix("head.weight")?;
    let bo = &params.tensor("head.bias")?.data;
    if input.cols != wh.rows {
        return Err(Error::Config(format!(
            "hidden layer expects {} features, got {}",
            wh.rows, input.cols
        )));
    }
    let mut hidden = input.matmul(&wh);
    hidden.add_row_vector(bh);
    hidden.data.iter_mut().for_each(|x| *x = x.tanh());
    let mut out = hidden.matmul(&wo);
    out.add_row_vector(bo);
    let mut norms = Vec::with_capacity(out.rows);
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let n = crate::domain::norm(row);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Degenerate(format!(
                "encoder output row {r} has norm {n}"
            )));
        }
        row.iter_mut().for_each(|x| *x /= n);
        norms.push(n);
    }
    Ok(HeadCache {
        input,
        hidden,
        norms,
        embeddings: out,
    })
}

/// Returns `(d_input, [g_hidden_w, g_hidden_b, g_head_w, g_head_b])`.
pub(crate) fn head_backward(
    params: &EncoderParams,
    cache: &HeadCache,
    d_emb: &Mat,
) -> Result<(Mat, [Vec<f64>; 4])> {
    let wh = params.matrix("hidden.weight")?;
    let wo = params.matrix("head.weight")?;
    let e = &cache.embeddings;
    if (d_emb.rows, d_emb.cols) != (e.rows, e.cols) {
        return Err(Error::Contract(format!(
            "embedding gradient {}x{} does not match output {}x{}",
            d_emb.rows, d_emb.cols, e.rows, e.cols
        )));
    }
    // d out = (d e − e (e·d e)) / ‖out‖
    let mut d_out = Mat::zeros(e.rows, e.cols);
    for r in 0..e.rows {
        let er = e.row(r);
        let dr = d_emb.row(r);
        let proj = crate::tensor::dot(er, dr);
        let n = cache.norms[r];
        for ((o, ev), dv) in d_out.row_mut(r).iter_mut().zip(er).zip(dr) {
            *o = (dv - ev * proj) / n;
        }
    }
    let g_wo = cache.hidden.t_matmul(&d_out);
    let g_bo = d_out.column_sums();
    let mut d_hidden = d_out.matmul_t(&wo);
    for (d, h) in d_hidden.data.iter_mut().zip(&cache.hidden.data) {
        *d *= 1.0 - h * h;
    }
    let g_wh = cache.input.t_matmul(&d_hidden);
    let g_bh = d_hidden.column_sums();
    let d_input = d_hidden.matmul_t(&wh);
    Ok((d_input, [g_wh.data, g_bh, g_wo.data, g_bo]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RngState;
    use proptest::prelude::*;

    fn small_image_arch() -> Architecture {
        Architecture::Image(ImageArch {
            image_size: 8,
            channels: 3,
            patch_size: 4,
            patch_proj: 2,
            hidden: 4,
            embed_dim: 4,
        })
    }

    fn pair(seed: u64, m: f64) -> EncoderPair {
        let mut rng = RngState::new(seed, "init").rng();
        let main = EncoderParams::init(small_image_arch(), &mut rng).unwrap();
        let mut p = EncoderPair::new(main, m).unwrap();
        // Move the twin away from main so the update is observable.
        let momentum = EncoderParams::init(small_image_arch(), &mut rng).unwrap();
        p.momentum = momentum;
        p
    }

    #[test]
    fn twin_starts_as_clone() {
        let mut rng = RngState::new(1, "init").rng();
        let main = EncoderParams::init(small_image_arch(), &mut rng).unwrap();
        let p = EncoderPair::new(main, 0.999).unwrap();
        assert_eq!(p.main, p.momentum);
        assert_eq!(p.main.distance(&p.momentum), 0.0);
    }

    #[test]
    fn momentum_one_is_identity() {
        let mut p = pair(2, 1.0);
        let before = p.momentum.clone();
        p.momentum_update().unwrap();
        assert_eq!(p.momentum, before);
    }

    #[test]
    fn momentum_zero_copies_main() {
        let mut p = pair(3, 0.0);
        let main = p.main.clone();
        p.momentum_update().unwrap();
        assert_eq!(p.momentum.tensors, main.tensors);
        assert_eq!(p.main, main);
    }

    #[test]
    fn scalar_update_example() {
        let mut p = pair(4, 0.999);
        for t in &mut p.momentum.tensors {
            t.data.iter_mut().for_each(|x| *x = 1.0);
        }
        for t in &mut p.main.tensors {
            t.data.iter_mut().for_each(|x| *x = 0.0);
        }
        p.momentum_update().unwrap();
        assert!(p.momentum.flatten().iter().all(|&x| x == 0.999));
    }

    #[test]
    fn coefficient_outside_unit_interval_rejected() {
        let mut rng = RngState::new(1, "init").rng();
        let main = EncoderParams::init(small_image_arch(), &mut rng).unwrap();
        assert!(matches!(EncoderPair::new(main.clone(), 1.5), Err(Error::Config(_))));
        let mut p = EncoderPair::new(main, 0.5).unwrap();
        assert!(p.set_coefficient(-0.1).is_err());
    }

    #[test]
    fn mismatched_twin_rejected() {
        let mut rng = RngState::new(1, "init").rng();
        let main = EncoderParams::init(small_image_arch(), &mut rng).unwrap();
        let mut other = main.clone();
        other.tensors[0].shape = vec![1];
        assert!(EncoderPair::from_parts(main, other, 0.9).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ema_contracts_geometrically(seed in 0u64..1000, m in 0.5f64..0.999, k in 1usize..100) {
            let mut p = pair(seed, m);
            let d0 = p.momentum.distance(&p.main);
            for _ in 0..k {
                p.momentum_update().unwrap();
            }
            let expected = m.powi(k as i32) * d0;
            prop_assert!((p.momentum.distance(&p.main) - expected).abs() <= 1e-10);
        }
    }
}
