//! Reference implementations shared by the integration tests. They are
//! written for clarity, not speed, and share no code with the library.
#![allow(dead_code)]

use blockmix::LabeledImage;
use num_bigint::BigUint;

/// Rec.601 luma straight from the RGB bytes.
pub fn luma(img: &LabeledImage) -> Vec<f64> {
    img.pixels()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// SSIM with a full 2-D Gaussian window and centred moments, averaged over
/// every window position that fits inside the image.
pub fn naive_ssim(a: &LabeledImage, b: &LabeledImage) -> f64 {
    const WIN: usize = 11;
    const SIGMA: f64 = 1.5;
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (w, h) = (a.width() as usize, a.height() as usize);
    let (x, y) = (luma(a), luma(b));

    let half = (WIN / 2) as f64;
    let mut weights = vec![0.0; WIN * WIN];
    for j in 0..WIN {
        for i in 0..WIN {
            let (dx, dy) = (i as f64 - half, j as f64 - half);
            weights[j * WIN + i] = (-(dx * dx + dy * dy) / (2.0 * SIGMA * SIGMA)).exp();
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= total);

    let mut sum = 0.0;
    let mut count = 0usize;
    for oy in 0..=h - WIN {
        for ox in 0..=w - WIN {
            let at = |plane: &[f64], i: usize, j: usize| plane[(oy + j) * w + ox + i];
            let (mut mx, mut my) = (0.0, 0.0);
            for j in 0..WIN {
                for i in 0..WIN {
                    let k = weights[j * WIN + i];
                    mx += k * at(&x, i, j);
                    my += k * at(&y, i, j);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for j in 0..WIN {
                for i in 0..WIN {
                    let k = weights[j * WIN + i];
                    let (dx, dy) = (at(&x, i, j) - mx, at(&y, i, j) - my);
                    vx += k * dx * dx;
                    vy += k * dy * dy;
                    cxy += k * dx * dy;
                }
            }
            sum += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    sum / count as f64
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, k| acc * k)
}

/// log10 of an arbitrarily large integer: shift down to 64 significant bits
/// and add the shift back as a power of two.
pub fn log10_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top: BigUint = x >> shift;
    let top = top.iter_u64_digits().next().unwrap_or(0) as f64;
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

/// Exact success probability of restoring one category, `1 / (blocks!)^category`,
/// returned as its denominator.
pub fn category_denominator(block_count: u64, category_size: u64) -> BigUint {
    factorial(block_count).pow(category_size as u32)
}

pub fn block_bytes(img: &LabeledImage, row: u32, col: u32, bl: u32, bw: u32) -> Vec<u8> {
    let w = img.width() as usize;
    let mut out = Vec::with_capacity((bl * bw * 3) as usize);
    for y in row * bw..(row + 1) * bw {
        let start = (y as usize * w + (col * bl) as usize) * 3;
        out.extend_from_slice(&img.pixels()[start..start + bl as usize * 3]);
    }
    out
}

/// Every file under `root`, keyed by relative path.
pub fn tree_bytes(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(dir: &std::path::Path, root: &std::path::Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}
