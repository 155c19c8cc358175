//! Structural similarity between original and mixed images.
//!
//! SSIM is evaluated on the Rec. 601 luminance plane with an 11x11 Gaussian
//! window (sigma 1.5), valid-region only, and averaged over all window
//! positions. Lower values mean the mixed image reveals less of the original.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LabeledImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub dynamic_range: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            dynamic_range: 255.0,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    /// Normalised 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let half = (self.window as f64 - 1.0) / 2.0;
        let taps: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - half;
                (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / sum).collect()
    }
}

/// Rec. 601 luma, `0.299 R + 0.587 G + 0.114 B`, unrounded.
pub fn luminance(img: &LabeledImage) -> Vec<f64> {
    img.pixels()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

pub fn ssim(a: &LabeledImage, b: &LabeledImage, params: &SsimParams) -> Result<f64> {
    if a.size() != b.size() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", a.width(), a.height()),
            actual: format!("{}x{}", b.width(), b.height()),
        });
    }
    ssim_planes(&luminance(a), &luminance(b), a.width() as usize, a.height() as usize, params)
}

/// SSIM of two `width x height` single-channel planes.
pub fn ssim_planes(x: &[f64], y: &[f64], width: usize, height: usize, params: &SsimParams) -> Result<f64> {
    let win = params.window;
    if width < win || height < win {
        return Err(Error::TooSmall(width as u32, height as u32, win));
    }
    assert_eq!(x.len(), width * height);
    assert_eq!(y.len(), width * height);
    let g = params.kernel();
    let (c1, c2) = (params.c1(), params.c2());
    let out_w = width - win + 1;
    let out_h = height - win + 1;

    // Horizontal pass over the five moment planes: x, y, x^2, y^2, xy.
    let mut horiz = vec![[0.0f64; 5]; height * out_w];
    for r in 0..height {
        let (xr, yr) = (&x[r * width..(r + 1) * width], &y[r * width..(r + 1) * width]);
        for c in 0..out_w {
            let mut acc = [0.0f64; 5];
            for (k, &gk) in g.iter().enumerate() {
                let (xv, yv) = (xr[c + k], yr[c + k]);
                acc[0] += gk * xv;
                acc[1] += gk * yv;
                acc[2] += gk * xv * xv;
                acc[3] += gk * yv * yv;
                acc[4] += gk * xv * yv;
            }
            horiz[r * out_w + c] = acc;
        }
    }

    let mut total = 0.0;
    for r in 0..out_h {
        for c in 0..out_w {
            let mut m = [0.0f64; 5];
            for (k, &gk) in g.iter().enumerate() {
                let h = &horiz[(r + k) * out_w + c];
                for (mi, hi) in m.iter_mut().zip(h) {
                    *mi += gk * hi;
                }
            }
            let [mx, my, exx, eyy, exy] = m;
            let (vx, vy, cxy) = (exx - mx * mx, eyy - my * my, exy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    Ok(total / (out_w * out_h) as f64)
}

/// Pairing key: source id with its file extension removed, so a
/// `male/a.jpg` original pairs with the `male/a.png` written after mixing.
pub fn pair_key(source_id: &str) -> &str {
    let name_start = source_id.rfind('/').map_or(0, |i| i + 1);
    match source_id[name_start..].rfind('.') {
        Some(dot) if dot > 0 => &source_id[..name_start + dot],
        _ => source_id,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsimReport {
    pub per_image: Vec<(String, f64)>,
    pub mean_ssim: f64,
    pub block_count: Option<u32>,
    pub replace_prob: Option<f64>,
    pub rounds: Option<u32>,
}

pub const REPORT_HEADER: &str = "blockmix-ssim-report 1";

impl SsimReport {
    pub fn min(&self) -> f64 {
        self.per_image.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.per_image.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn with_echo(mut self, block_count: u32, replace_prob: f64, rounds: u32) -> Self {
        self.block_count = Some(block_count);
        self.replace_prob = Some(replace_prob);
        self.rounds = Some(rounds);
        self
    }

    /// Line-delimited, tab-separated `key=value` records:
    ///
    /// ```text
    /// blockmix-ssim-report 1
    /// image	source_id=male/a.jpg	ssim=0.412345678901
    /// summary	mean_ssim=0.41	images=1	n_b=16	p=0.5	n_t=1
    /// ```
    ///
    /// Unknown echo values are written as `-`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{REPORT_HEADER}").unwrap();
        for (id, v) in &self.per_image {
            writeln!(s, "image\tsource_id={id}\tssim={v:.12}").unwrap();
        }
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        writeln!(
            s,
            "summary\tmean_ssim={:.12}\timages={}\tn_b={}\tp={}\tn_t={}",
            self.mean_ssim,
            self.per_image.len(),
            opt(self.block_count.map(|v| v.to_string())),
            opt(self.replace_prob.map(|v| v.to_string())),
            opt(self.rounds.map(|v| v.to_string())),
        )
        .unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |m: String| Error::Parse {
            what: "ssim report".into(),
            message: m,
        };
        let mut lines = text.lines();
        if lines.next() != Some(REPORT_HEADER) {
            return Err(err(format!("missing `{REPORT_HEADER}` header")));
        }
        let mut per_image = Vec::new();
        let mut summary: Option<HashMap<&str, &str>> = None;
        for line in lines.filter(|l| !l.is_empty()) {
            let mut fields = line.split('\t');
            let kind = fields.next().unwrap_or_default();
            let kv: HashMap<&str, &str> = fields
                .map(|f| f.split_once('=').ok_or_else(|| err(format!("bad field `{f}`"))))
                .collect::<Result<_>>()?;
            match kind {
                "image" => {
                    let id = kv.get("source_id").ok_or_else(|| err("image without source_id".into()))?;
                    let v = kv
                        .get("ssim")
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| err(format!("bad ssim for `{id}`")))?;
                    per_image.push((id.to_string(), v));
                }
                "summary" => summary = Some(kv),
                other => return Err(err(format!("unknown record `{other}`"))),
            }
        }
        let summary = summary.ok_or_else(|| err("missing summary".into()))?;
        let mean_ssim = summary
            .get("mean_ssim")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err("bad mean_ssim".into()))?;
        fn echo<T: std::str::FromStr>(kv: &HashMap<&str, &str>, key: &str) -> Option<T> {
            kv.get(key).filter(|v| **v != "-").and_then(|v| v.parse().ok())
        }
        Ok(Self {
            per_image,
            mean_ssim,
            block_count: echo(&summary, "n_b"),
            replace_prob: echo(&summary, "p"),
            rounds: echo(&summary, "n_t"),
        })
    }
}

/// SSIM of every `(original, mixed)` pair, matched by [`pair_key`].
/// Report order follows `originals`.
pub fn dataset_ssim(
    originals: &[LabeledImage],
    mixed: &[LabeledImage],
    params: &SsimParams,
) -> Result<SsimReport> {
    if originals.len() != mixed.len() {
        return Err(Error::PairingMismatch(format!(
            "{} originals vs {} mixed images",
            originals.len(),
            mixed.len()
        )));
    }
    if originals.is_empty() {
        return Err(Error::PairingMismatch("no images to compare".into()));
    }
    let mut by_key: HashMap<&str, &LabeledImage> = HashMap::with_capacity(mixed.len());
    for m in mixed {
        if by_key.insert(pair_key(m.source_id()), m).is_some() {
            return Err(Error::PairingMismatch(format!(
                "mixed set has two images for `{}`",
                pair_key(m.source_id())
            )));
        }
    }
    let pairs: Vec<(&LabeledImage, &LabeledImage)> = originals
        .iter()
        .map(|o| {
            by_key
                .remove(pair_key(o.source_id()))
                .map(|m| (o, m))
                .ok_or_else(|| Error::PairingMismatch(format!("no mixed image for `{}`", o.source_id())))
        })
        .collect::<Result<_>>()?;

    let per_image: Vec<(String, f64)> = pairs
        .par_iter()
        .map(|(o, m)| ssim(o, m, params).map(|v| (o.source_id().to_owned(), v)))
        .collect::<Result<_>>()?;
    let mean_ssim = per_image.iter().map(|p| p.1).sum::<f64>() / per_image.len() as f64;
    Ok(SsimReport {
        per_image,
        mean_ssim,
        block_count: None,
        replace_prob: None,
        rounds: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn constants() {
        let p = SsimParams::default();
        assert!((p.c1() - 6.5025).abs() < 1e-12);
        assert!((p.c2() - 58.5225).abs() < 1e-12);
        assert!((p.kernel().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn self_similarity_is_one() {
        let d = synth::texture_dataset(2, 1, (40, 32), 3);
        let v = ssim(&d[0], &d[0], &SsimParams::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn uniform_offset_closed_form() {
        let p = SsimParams::default();
        let a = LabeledImage::uniform(20, 20, [100, 100, 100], "a", "a").unwrap();
        let b = LabeledImage::uniform(20, 20, [140, 140, 140], "a", "b").unwrap();
        let expected = (2.0 * 100.0 * 140.0 + p.c1()) / (100.0f64.powi(2) + 140.0f64.powi(2) + p.c1());
        assert!((ssim(&a, &b, &p).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let p = SsimParams::default();
        let a = LabeledImage::uniform(20, 20, [0; 3], "a", "a").unwrap();
        let b = LabeledImage::uniform(20, 21, [0; 3], "a", "b").unwrap();
        assert!(matches!(ssim(&a, &b, &p), Err(Error::ShapeMismatch { .. })));
        let c = LabeledImage::uniform(10, 20, [0; 3], "a", "c").unwrap();
        assert!(matches!(ssim(&c, &c, &p), Err(Error::TooSmall(..))));
    }

    #[test]
    fn pair_keys() {
        assert_eq!(pair_key("male/a.jpg"), "male/a");
        assert_eq!(pair_key("male/a.b.png"), "male/a.b");
        assert_eq!(pair_key("male/.hidden"), "male/.hidden");
        assert_eq!(pair_key("noext"), "noext");
        assert_eq!(pair_key("dir.v2/noext"), "dir.v2/noext");
    }

    #[test]
    fn dataset_pairing_by_stem() {
        let p = SsimParams::default();
        let orig = synth::texture_dataset(3, 1, (16, 16), 0);
        let renamed: Vec<_> = orig
            .iter()
            .rev()
            .map(|i| i.clone().with_source_id(i.source_id().replace(".png", ".bmp")))
            .collect();
        let r = dataset_ssim(&orig, &renamed, &p).unwrap();
        assert!((r.mean_ssim - 1.0).abs() < 1e-9);
        assert_eq!(r.per_image[0].0, orig[0].source_id());

        assert!(matches!(dataset_ssim(&orig, &renamed[..2], &p), Err(Error::PairingMismatch(_))));
        let mut dup = renamed.clone();
        dup[1] = dup[0].clone();
        assert!(matches!(dataset_ssim(&orig, &dup, &p), Err(Error::PairingMismatch(_))));
    }

    #[test]
    fn report_text_round_trip() {
        let r = SsimReport {
            per_image: vec![("m/a b.png".into(), 0.25), ("f/c.png".into(), -0.125)],
            mean_ssim: 0.0625,
            block_count: Some(16),
            replace_prob: Some(0.5),
            rounds: None,
        };
        let text = r.to_text();
        assert!(text.starts_with(REPORT_HEADER));
        assert!(text.contains("n_t=-"));
        assert_eq!(SsimReport::from_text(&text).unwrap(), r);
        assert!(SsimReport::from_text("nope").is_err());
    }
}
