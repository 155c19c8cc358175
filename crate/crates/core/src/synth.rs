//! Seeded synthetic datasets for benchmarks and tests.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::LabeledImage;

fn label_name(l: usize) -> String {
    format!("class{l}")
}

/// `n` uniform-noise images spread round-robin over `labels` classes.
/// Source ids look like `class0/img00003.png`.
pub fn random_dataset(n: usize, labels: usize, size: (u32, u32), seed: u64) -> Vec<LabeledImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bytes = size.0 as usize * size.1 as usize * 3;
    (0..n)
        .map(|i| {
            let label = label_name(i % labels.max(1));
            let mut px = vec![0u8; bytes];
            rng.fill(&mut px[..]);
            LabeledImage::new(size.0, size.1, px, label.clone(), format!("{label}/img{i:05}.png"))
                .expect("generated buffer matches size")
        })
        .collect()
}

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

impl Wave {
    fn random<R: Rng>(rng: &mut R, max_freq: f64, amp: f64) -> Self {
        Self {
            fx: rng.random_range(-max_freq..max_freq),
            fy: rng.random_range(-max_freq..max_freq),
            phase: rng.random_range(0.0..TAU),
            amp: rng.random_range(0.5 * amp..amp),
        }
    }

    fn at(&self, u: f64, v: f64) -> f64 {
        self.amp * (TAU * (self.fx * u + self.fy * v) + self.phase).sin()
    }
}

/// Smooth natural-looking textures. Images of one label share a layout
/// (low-frequency waves); each image adds its own waves, a colour cast and
/// mild grain, so same-label images are similar without being identical.
pub fn texture_dataset(n: usize, labels: usize, size: (u32, u32), seed: u64) -> Vec<LabeledImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = labels.max(1);
    let layouts: Vec<Vec<Wave>> = (0..labels)
        .map(|_| (0..3).map(|_| Wave::random(&mut rng, 2.0, 40.0)).collect())
        .collect();
    let (w, h) = size;
    (0..n)
        .map(|i| {
            let l = i % labels;
            let own: Vec<Wave> = (0..4).map(|_| Wave::random(&mut rng, 6.0, 30.0)).collect();
            let cast: [f64; 3] = std::array::from_fn(|_| rng.random_range(-25.0..25.0));
            let base = rng.random_range(90.0..160.0);
            let mut px = Vec::with_capacity(w as usize * h as usize * 3);
            for y in 0..h {
                for x in 0..w {
                    let (u, v) = (x as f64 / w as f64, y as f64 / h as f64);
                    let shade = base
                        + layouts[l].iter().map(|wv| wv.at(u, v)).sum::<f64>()
                        + own.iter().map(|wv| wv.at(u, v)).sum::<f64>();
                    for c in cast {
                        let grain = rng.random_range(-6.0..6.0);
                        px.push((shade + c + grain).round().clamp(0.0, 255.0) as u8);
                    }
                }
            }
            let label = label_name(l);
            LabeledImage::new(w, h, px, label.clone(), format!("{label}/tex{i:05}.png"))
                .expect("generated buffer matches size")
        })
        .collect()
}
