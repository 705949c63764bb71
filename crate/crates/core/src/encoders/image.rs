use serde::{Deserialize, Serialize};

use super::{head_backward, head_forward, Architecture, Encoder, EncoderParams, Gradients, HeadCache};
use crate::domain::Embedding;
use crate::error::{Error, Result};
use crate::tensor::{Image, Mat};

/// Patch-projection image encoder.
///
/// Non-overlapping `patch_size` patches are flattened and projected by one
/// shared linear map; the projected patches are concatenated in raster
/// order (so position is retained) and fed to the shared head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageArch {
    pub image_size: usize,
    pub channels: usize,
    pub patch_size: usize,
    pub patch_proj: usize,
    pub hidden: usize,
    pub embed_dim: usize,
}

impl ImageArch {
    pub fn patches_per_side(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn num_patches(&self) -> usize {
        self.patches_per_side() * self.patches_per_side()
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.image_size == 0 || !self.image_size.is_multiple_of(self.patch_size) {
            return Err(Error::Config(format!(
                "image size {} is not a positive multiple of patch size {}",
                self.image_size, self.patch_size
            )));
        }
        if self.channels == 0 || self.patch_proj == 0 || self.hidden == 0 || self.embed_dim == 0 {
            return Err(Error::Config("image encoder layer sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ImageCache {
    patches: Mat,
    head: HeadCache,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ImageEncoder;

fn arch_of(params: &EncoderParams) -> Result<&ImageArch> {
    match &params.arch {
        Architecture::Image(a) => Ok(a),
        Architecture::Text(_) => Err(Error::Config("expected image encoder parameters".into())),
    }
}

/// Rows are `(image, patch)` pairs in raster order; columns are
/// `(dy, dx, channel)` within the patch.
fn extract_patches(arch: &ImageArch, batch: &[Image]) -> Result<Mat> {
    let ps = arch.patch_size;
    let side = arch.patches_per_side();
    let mut m = Mat::zeros(batch.len() * arch.num_patches(), arch.patch_dim());
    for (n, img) in batch.iter().enumerate() {
        if img.height != arch.image_size || img.width != arch.image_size || img.channels != arch.channels {
            return Err(Error::Config(format!(
                "image {n} is {}x{}x{}, encoder expects {}x{}x{}",
                img.height, img.width, img.channels, arch.image_size, arch.image_size, arch.channels
            )));
        }
        for py in 0..side {
            for px in 0..side {
                let row = m.row_mut(n * arch.num_patches() + py * side + px);
                let mut col = 0;
                for dy in 0..ps {
                    let y = py * ps + dy;
                    let start = (y * img.width + px * ps) * img.channels;
                    let len = ps * img.channels;
                    row[col..col + len].copy_from_slice(&img.data[start..start + len]);
                    col += len;
                }
            }
        }
    }
    Ok(m)
}

impl Encoder for ImageEncoder {
    type Input = Image;
    type Cache = ImageCache;

    fn forward(&self, params: &EncoderParams, batch: &[Image]) -> Result<(Mat, ImageCache)> {
        let arch = arch_of(params)?;
        let patches = extract_patches(arch, batch)?;
        let wp = params.matrix("patch.weight")?;
        let bp = &params.tensor("patch.bias")?.data;
        let mut proj = patches.matmul(&wp);
        proj.add_row_vector(bp);
        // (N·P × proj) and (N × P·proj) share the same row-major layout.
        let features = Mat::from_vec(batch.len(), arch.num_patches() * arch.patch_proj, proj.data)?;
        let head = head_forward(params, features)?;
        Ok((head.embeddings.clone(), ImageCache { patches, head }))
    }

    fn backward(&self, params: &EncoderParams, cache: &ImageCache, d_emb: &Mat) -> Result<Gradients> {
        let arch = arch_of(params)?;
        let (d_features, [g_wh, g_bh, g_wo, g_bo]) = head_backward(params, &cache.head, d_emb)?;
        let d_proj = Mat::from_vec(cache.patches.rows, arch.patch_proj, d_features.data)?;
        let g_wp = cache.patches.t_matmul(&d_proj);
        let g_bp = d_proj.column_sums();
        Ok(Gradients {
            tensors: vec![g_wp.data, g_bp, g_wh, g_bh, g_wo, g_bo],
        })
    }
}

impl ImageEncoder {
    /// Gradient w.r.t. the input pixels, one image per batch entry.
    pub fn input_gradient(&self, params: &EncoderParams, cache: &ImageCache, d_emb: &Mat) -> Result<Vec<Image>> {
        let arch = arch_of(params)?;
        let (d_features, _) = head_backward(params, &cache.head, d_emb)?;
        let d_proj = Mat::from_vec(cache.patches.rows, arch.patch_proj, d_features.data)?;
        let wp = params.matrix("patch.weight")?;
        let d_patches = d_proj.matmul_t(&wp);
        let ps = arch.patch_size;
        let side = arch.patches_per_side();
        let n = cache.head.embeddings.rows;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut img = Image::filled(arch.image_size, arch.image_size, arch.channels, 0.0);
            for py in 0..side {
                for px in 0..side {
                    let row = d_patches.row(i * arch.num_patches() + py * side + px);
                    let mut col = 0;
                    for dy in 0..ps {
                        let y = py * ps + dy;
                        let start = (y * img.width + px * ps) * img.channels;
                        let len = ps * img.channels;
                        img.data[start..start + len].copy_from_slice(&row[col..col + len]);
                        col += len;
                    }
                }
            }
            out.push(img);
        }
        Ok(out)
    }
}

/// Unit-norm embeddings of a preprocessed image batch.
pub fn encode_image(params: &EncoderParams, batch: &[Image]) -> Result<Vec<Embedding>> {
    let e = ImageEncoder.encode(params, batch)?;
    Ok((0..e.rows)
        .map(|r| Embedding {
            values: e.row(r).to_vec(),
            normalized: true,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{l2_normalize, RngState};
    use rand::Rng;

    fn arch() -> ImageArch {
        ImageArch {
            image_size: 8,
            channels: 3,
            patch_size: 4,
            patch_proj: 2,
            hidden: 5,
            embed_dim: 4,
        }
    }

    fn random_image(rng: &mut impl Rng, a: &ImageArch) -> Image {
        let n = a.image_size * a.image_size * a.channels;
        Image::new(a.image_size, a.image_size, a.channels, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_weights_map_to_normalized_bias() {
        let mut p = EncoderParams::zeros(Architecture::Image(arch())).unwrap();
        let b = vec![1.0, -2.0, 0.5, 3.0];
        p.tensor_mut("head.bias").unwrap().data = b.clone();
        let mut rng = RngState::new(0, "test").rng();
        let imgs: Vec<Image> = (0..3).map(|_| random_image(&mut rng, &arch())).collect();
        let expected = l2_normalize(&b).unwrap().values;
        for e in encode_image(&p, &imgs).unwrap() {
            for (x, y) in e.values.iter().zip(&expected) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicates_give_identical_unit_embeddings() {
        let mut rng = RngState::new(1, "init").rng();
        let p = EncoderParams::init(Architecture::Image(arch()), &mut rng).unwrap();
        let img = random_image(&mut rng, &arch());
        let out = encode_image(&p, &[img.clone(), img]).unwrap();
        assert_eq!(out[0], out[1]);
        assert!((out[0].norm() - 1.0).abs() < 1e-6);
        assert_eq!(out[0].dim(), 4);
    }

    #[test]
    fn wrong_shape_is_config_error() {
        let mut rng = RngState::new(1, "init").rng();
        let p = EncoderParams::init(Architecture::Image(arch()), &mut rng).unwrap();
        let img = Image::filled(16, 16, 3, 0.0);
        assert!(matches!(encode_image(&p, &[img]), Err(Error::Config(_))));
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = RngState::new(5, "init").rng();
        let p = EncoderParams::init(Architecture::Image(arch()), &mut rng).unwrap();
        let imgs: Vec<Image> = (0..2).map(|_| random_image(&mut rng, &arch())).collect();
        let w = Mat::from_vec(2, 4, (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let objective = |batch: &[Image]| -> f64 {
            let e = ImageEncoder.encode(&p, batch).unwrap();
            e.data.iter().zip(&w.data).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = ImageEncoder.forward(&p, &imgs).unwrap();
        let grads = ImageEncoder.input_gradient(&p, &cache, &w).unwrap();
        let h = 1e-5;
        for n in 0..imgs.len() {
            for i in 0..imgs[n].data.len() {
                let mut plus = imgs.clone();
                plus[n].data[i] += h;
                let mut minus = imgs.clone();
                minus[n].data[i] -= h;
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let analytic = grads[n].data[i];
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!((analytic - numeric).abs() / denom < 1e-4, "pixel {i}: {analytic} vs {numeric}");
            }
        }
    }
}
