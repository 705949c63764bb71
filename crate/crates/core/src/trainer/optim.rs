use serde::{Deserialize, Serialize};

use crate::encoders::{EncoderParams, Gradients};
use crate::error::{Error, Result};

/// Adam with decoupled weight decay over a fixed list of parameter sets.
///
/// Moments are stored per tensor, in the order of the parameter sets passed
/// to [`AdamW::new`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(params: &[&EncoderParams], lr: f64, weight_decay: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .iter()
            .flat_map(|p| p.tensors.iter().map(|t| vec![0.0; t.data.len()]))
            .collect();
        Self {
            lr,
            weight_decay,
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn num_params(&self) -> usize {
        self.m.iter().map(Vec::len).sum()
    }

    /// `θ ← θ(1 − lr·wd) − lr·m̂/(√v̂ + ε)`.
    pub fn update(&mut self, params: &mut [&mut EncoderParams], grads: &[&Gradients]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Contract("one gradient set per parameter set expected".into()));
        }
        let tensors: usize = params.iter().map(|p| p.tensors.len()).sum();
        if tensors != self.m.len() {
            return Err(Error::Contract("optimizer state does not match parameters".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - self.lr * self.weight_decay;
        let mut slot = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (tensor, gt) in p.tensors.iter_mut().zip(&g.tensors) {
                let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
                if m.len() != tensor.data.len() || gt.len() != tensor.data.len() {
                    return Err(Error::Contract(format!("shape mismatch at `{}`", tensor.name)));
                }
                for i in 0..tensor.data.len() {
                    let gi = gt[i];
                    m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                    v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    tensor.data[i] = tensor.data[i] * decay - self.lr * m_hat / (v_hat.sqrt() + self.eps);
                }
                slot += 1;
            }
        }
        Ok(())
    }
}
