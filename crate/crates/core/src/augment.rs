//! Flip, rotation and brightness augmentation of mixed training sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LabeledImage, CHANNELS};

pub const DEFAULT_ROTATION_DEGREES: f64 = 15.0;
pub const DEFAULT_BRIGHTNESS_FACTOR: f64 = 1.3;

/// `None` disables an augmentation. With `emit_all_variants` every enabled
/// augmentation adds one image next to the source; otherwise the enabled
/// augmentations are chained and the result replaces the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub flip_horizontal: bool,
    pub rotation_degrees: Option<f64>,
    pub brightness_factor: Option<f64>,
    pub emit_all_variants: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_horizontal: true,
            rotation_degrees: Some(DEFAULT_ROTATION_DEGREES),
            brightness_factor: Some(DEFAULT_BRIGHTNESS_FACTOR),
            emit_all_variants: true,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self {
            flip_horizontal: false,
            rotation_degrees: None,
            brightness_factor: None,
            emit_all_variants: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.brightness_factor {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::InvalidConfig(format!("brightness factor {f} must be >= 0")));
            }
        }
        if let Some(d) = self.rotation_degrees {
            if !(d.abs() <= 180.0) {
                return Err(Error::InvalidConfig(format!("rotation {d} must be within [-180, 180] degrees")));
            }
        }
        Ok(())
    }

    pub fn enabled_count(&self) -> usize {
        self.flip_horizontal as usize
            + self.rotation_degrees.is_some() as usize
            + self.brightness_factor.is_some() as usize
    }
}

/// Horizontal mirror.
pub fn flip(img: &LabeledImage) -> LabeledImage {
    let row_bytes = img.width() as usize * CHANNELS;
    let mut out = Vec::with_capacity(img.pixels().len());
    for row in img.pixels().chunks_exact(row_bytes) {
        for px in row.chunks_exact(CHANNELS).rev() {
            out.extend_from_slice(px);
        }
    }
    img.with_pixels(out)
}

/// Rotate counter-clockwise by `degrees` about the image centre with
/// bilinear resampling. Pixels whose source falls outside the frame are
/// black.
pub fn rotate(img: &LabeledImage, degrees: f64) -> LabeledImage {
    const EDGE: f64 = 1e-9;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let src = img.pixels();
    let at = |x: usize, y: usize, c: usize| src[(y * w + x) * CHANNELS + c] as f64;
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let sx = cx + cos * dx - sin * dy;
            let sy = cy + sin * dx + cos * dy;
            if sx < -EDGE || sy < -EDGE || sx > (w - 1) as f64 + EDGE || sy > (h - 1) as f64 + EDGE {
                continue;
            }
            let sx = sx.clamp(0.0, (w - 1) as f64);
            let sy = sy.clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for c in 0..CHANNELS {
                let top = at(x0, y0, c) * (1.0 - fx) + at(x1, y0, c) * fx;
                let bottom = at(x0, y1, c) * (1.0 - fx) + at(x1, y1, c) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[(y * w + x) * CHANNELS + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    img.with_pixels(out)
}

/// `v -> clamp(round(v * factor), 0, 255)` on every channel.
pub fn brighten(img: &LabeledImage, factor: f64) -> LabeledImage {
    let out = img
        .pixels()
        .iter()
        .map(|&v| (v as f64 * factor).round().clamp(0.0, 255.0) as u8)
        .collect();
    img.with_pixels(out)
}

/// `male/a.png` + `flip` -> `male/a_flip.png`.
pub fn variant_id(source_id: &str, tag: &str) -> String {
    let key = crate::ssim::pair_key(source_id);
    format!("{key}_{tag}{}", &source_id[key.len()..])
}

pub fn augment_dataset(dataset: &[LabeledImage], config: &AugmentConfig) -> Result<Vec<LabeledImage>> {
    config.validate()?;
    let mut out = Vec::with_capacity(dataset.len() * (1 + config.enabled_count()));
    for img in dataset {
        if config.emit_all_variants {
            out.push(img.clone());
            if config.flip_horizontal {
                out.push(flip(img).with_source_id(variant_id(img.source_id(), "flip")));
            }
            if let Some(d) = config.rotation_degrees {
                out.push(rotate(img, d).with_source_id(variant_id(img.source_id(), "rot")));
            }
            if let Some(f) = config.brightness_factor {
                out.push(brighten(img, f).with_source_id(variant_id(img.source_id(), "bright")));
            }
        } else {
            let mut v = img.clone();
            if config.flip_horizontal {
                v = flip(&v);
            }
            if let Some(d) = config.rotation_degrees {
                v = rotate(&v, d);
            }
            if let Some(f) = config.brightness_factor {
                v = brighten(&v, f);
            }
            out.push(v);
        }
    }
    Ok(out)
}
