use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Image;

pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

pub const MIN_INPUT_SIZE: usize = 16;
pub const FULL_SCALE_INPUT_SIZE: usize = 224;
pub const TOY_INPUT_SIZE: usize = 32;

/// Bilinear sample of the region `[y0, y0+h) × [x0, x0+w)` (continuous
/// coordinates) onto an `out_h × out_w` grid, pixel-center aligned, with
/// edge clamping.
pub fn resample_region(img: &Image, y0: f64, x0: f64, h: f64, w: f64, out_h: usize, out_w: usize) -> Image {
    let mut out = Image::filled(out_h, out_w, img.channels, 0.0);
    let sy = h / out_h as f64;
    let sx = w / out_w as f64;
    let max_y = (img.height - 1) as f64;
    let max_x = (img.width - 1) as f64;
    for oy in 0..out_h {
        let fy = (y0 + (oy as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y_lo = fy.floor() as usize;
        let y_hi = (y_lo + 1).min(img.height - 1);
        let wy = fy - y_lo as f64;
        for ox in 0..out_w {
            let fx = (x0 + (ox as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let x_lo = fx.floor() as usize;
            let x_hi = (x_lo + 1).min(img.width - 1);
            let wx = fx - x_lo as f64;
            for c in 0..img.channels {
                let top = img.at(y_lo, x_lo, c) * (1.0 - wx) + img.at(y_lo, x_hi, c) * wx;
                let bottom = img.at(y_hi, x_lo, c) * (1.0 - wx) + img.at(y_hi, x_hi, c) * wx;
                *out.at_mut(oy, ox, c) = top * (1.0 - wy) + bottom * wy;
            }
        }
    }
    out
}

pub fn bilinear_resize(img: &Image, out_h: usize, out_w: usize) -> Image {
    resample_region(img, 0.0, 0.0, img.height as f64, img.width as f64, out_h, out_w)
}

/// Resize to `size × size`, replicate grayscale to three channels, then
/// standardize each channel with the ImageNet statistics.
pub fn preprocess(raw: &Image, size: usize) -> Result<Image> {
    if raw.is_empty() || raw.height == 0 || raw.width == 0 {
        return Err(Error::Degenerate("empty image".into()));
    }
    if size < MIN_INPUT_SIZE {
        return Err(Error::Config(format!(
            "input size {size} below minimum {MIN_INPUT_SIZE}"
        )));
    }
    if raw.channels != 1 && raw.channels != 3 {
        return Err(Error::Config(format!(
            "expected 1 or 3 channels, got {}",
            raw.channels
        )));
    }
    let resized = bilinear_resize(raw, size, size);
    let mut out = Image::filled(size, size, 3, 0.0);
    for y in 0..size {
        for x in 0..size {
            for c in 0..3 {
                let src = if resized.channels == 1 { 0 } else { c };
                *out.at_mut(y, x, c) = (resized.at(y, x, src) - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
            }
        }
    }
    Ok(out)
}

/// Reads an 8-bit PNG as single-channel intensities in `[0, 1]`.
pub fn load_gray_png(path: &Path) -> Result<Image> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&p| p as f64 / 255.0).collect();
    Image::new(h as usize, w as usize, 1, data)
}

/// Writes channel 0 of `img` (values clamped to `[0, 1]`) as 8-bit gray.
pub fn save_gray_png(img: &Image, path: &Path) -> Result<()> {
    let mut buf = image::GrayImage::new(img.width as u32, img.height as u32);
    for y in 0..img.height {
        for x in 0..img.width {
            let v = (img.at(y, x, 0).clamp(0.0, 1.0) * 255.0).round() as u8;
            buf.put_pixel(x as u32, y as u32, image::Luma([v]));
        }
    }
    buf.save(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_valued_channel_standardizes_to_zero() {
        let raw = Image::filled(20, 20, 1, 0.485);
        let out = preprocess(&raw, 16).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                assert!(out.at(y, x, 0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_size_resize_is_identity() {
        let data: Vec<f64> = (0..32 * 32).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let raw = Image::new(32, 32, 1, data).unwrap();
        let r = bilinear_resize(&raw, 32, 32);
        for (a, b) in r.data.iter().zip(&raw.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn output_shape() {
        let raw = Image::filled(64, 64, 1, 0.3);
        let out = preprocess(&raw, 32).unwrap();
        assert_eq!((out.height, out.width, out.channels), (32, 32, 3));
        let expected = (0.3 - IMAGENET_MEAN[2]) / IMAGENET_STD[2];
        assert!((out.at(5, 7, 2) - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_image_rejected() {
        let raw = Image::new(0, 0, 1, vec![]).unwrap();
        assert!(matches!(preprocess(&raw, 32), Err(Error::Degenerate(_))));
        assert!(matches!(preprocess(&Image::filled(8, 8, 1, 0.0), 8), Err(Error::Config(_))));
    }

    #[test]
    fn png_roundtrip_quantizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        let data: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let img = Image::new(8, 8, 1, data).unwrap();
        save_gray_png(&img, &p).unwrap();
        let back = load_gray_png(&p).unwrap();
        for (a, b) in back.data.iter().zip(&img.data) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}
