//! Shared domain types: labeled RGB images, the even block partition of a
//! canonical image size, and the mixing configuration.
//!
//! Geometry convention: *length* is the horizontal extent (image width,
//! block columns) and *width* is the vertical extent (image height, block
//! rows). A partition of a `len x wid` image into `block_len x block_wid` blocks
//! has `wid / block_wid` rows and `len / block_len` columns.

use image::{imageops::FilterType, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// Name of the resampling filter applied when normalising images to the
/// canonical size. Recorded in manifests.
pub const RESIZE_FILTER: &str = "bilinear";

/// An RGB8 image with its class label and a stable source identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    label: String,
    source_id: String,
}

impl LabeledImage {
    pub fn new(
        width: u32,
        height: u32,
        pixels: Vec<u8>,
        label: impl Into<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let label = label.into();
        let source_id = source_id.into();
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "`{source_id}` has zero dimension {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * CHANNELS;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "`{source_id}` buffer holds {} bytes, {width}x{height} RGB needs {expected}",
                pixels.len()
            )));
        }
        if label.is_empty() {
            return Err(Error::InvalidImage(format!("`{source_id}` has an empty label")));
        }
        Ok(Self {
            width,
            height,
            pixels,
            label,
            source_id,
        })
    }

    /// Image filled with one RGB colour.
    pub fn uniform(
        width: u32,
        height: u32,
        rgb: [u8; 3],
        label: impl Into<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * CHANNELS)
            .collect();
        Self::new(width, height, pixels, label, source_id)
    }

    pub fn from_rgb_image(
        img: RgbImage,
        label: impl Into<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw(), label, source_id)
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("buffer length checked at construction")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// `(length, width)` in the partition convention, i.e. `(cols, rows)` of pixels.
    pub fn size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Same label and source id, new pixel buffer of identical geometry.
    pub(crate) fn with_pixels(&self, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        Self {
            width: self.width,
            height: self.height,
            pixels,
            label: self.label.clone(),
            source_id: self.source_id.clone(),
        }
    }

    #[cfg(test)]
    pub(crate) fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    /// Bilinear resample to `(length, width)`. Returns a clone when the size
    /// already matches.
    pub fn resized(&self, size: (u32, u32)) -> Self {
        if self.size() == size {
            return self.clone();
        }
        let out = image::imageops::resize(&self.to_rgb_image(), size.0, size.1, FilterType::Triangle);
        self.resized_from(out)
    }

    fn resized_from(&self, img: RgbImage) -> Self {
        let (w, h) = img.dimensions();
        Self {
            width: w,
            height: h,
            pixels: img.into_raw(),
            label: self.label.clone(),
            source_id: self.source_id.clone(),
        }
    }
}

/// Even grid partition of a canonical image size into equal blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRecord", into = "PartitionRecord")]
pub struct PartitionSpec {
    block_len: u32,
    block_wid: u32,
    img_len: u32,
    img_wid: u32,
    rows: u32,
    cols: u32,
}

#[derive(Serialize, Deserialize)]
struct PartitionRecord {
    block_len: u32,
    block_wid: u32,
    img_len: u32,
    img_wid: u32,
    rows: u32,
    cols: u32,
    block_count: u32,
}

impl From<PartitionSpec> for PartitionRecord {
    fn from(p: PartitionSpec) -> Self {
        Self {
            block_len: p.block_len,
            block_wid: p.block_wid,
            img_len: p.img_len,
            img_wid: p.img_wid,
            rows: p.rows,
            cols: p.cols,
            block_count: p.block_count(),
        }
    }
}

impl TryFrom<PartitionRecord> for PartitionSpec {
    type Error = Error;

    fn try_from(r: PartitionRecord) -> Result<Self> {
        let spec = derive_partition((r.img_len, r.img_wid), r.block_len, r.block_wid)?;
        if spec.rows != r.rows || spec.cols != r.cols || spec.block_count() != r.block_count {
            return Err(Error::InvalidConfig(format!(
                "partition record {}x{} grid / {} blocks disagrees with geometry",
                r.rows, r.cols, r.block_count
            )));
        }
        Ok(spec)
    }
}

impl PartitionSpec {
    pub fn block_len(&self) -> u32 {
        self.block_len
    }

    pub fn block_wid(&self) -> u32 {
        self.block_wid
    }

    pub fn img_len(&self) -> u32 {
        self.img_len
    }

    pub fn img_wid(&self) -> u32 {
        self.img_wid
    }

    pub fn canonical_size(&self) -> (u32, u32) {
        (self.img_len, self.img_wid)
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    /// Number of blocks.
    pub fn block_count(&self) -> u32 {
        self.rows * self.cols
    }

    /// Pixels per image.
    pub fn pixel_count(&self) -> u64 {
        self.img_len as u64 * self.img_wid as u64
    }

    pub fn positions(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (r, c)))
    }

    fn check_position(&self, row: u32, col: u32) -> Result<()> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::OutOfGrid {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    fn check_image(&self, img: &LabeledImage) -> Result<()> {
        if img.size() != self.canonical_size() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} image", self.img_len, self.img_wid),
                actual: format!("{}x{} (`{}`)", img.width, img.height, img.source_id),
            });
        }
        Ok(())
    }
}

/// Partition `canonical_size = (length, width)` into `block_len x block_wid` blocks.
pub fn derive_partition(canonical_size: (u32, u32), block_len: u32, block_wid: u32) -> Result<PartitionSpec> {
    let (img_len, img_wid) = canonical_size;
    if img_len == 0 || img_wid == 0 || block_len == 0 || block_wid == 0 {
        return Err(Error::InvalidConfig(format!(
            "partition dimensions must be positive (image {img_len}x{img_wid}, block {block_len}x{block_wid})"
        )));
    }
    if img_len % block_len != 0 || img_wid % block_wid != 0 {
        return Err(Error::NonDivisible {
            img_len,
            img_wid,
            block_len,
            block_wid,
        });
    }
    Ok(PartitionSpec {
        block_len,
        block_wid,
        img_len,
        img_wid,
        rows: img_wid / block_wid,
        cols: img_len / block_len,
    })
}

/// One `block_wid x block_len x 3` block cut from an image at grid position `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub row: u32,
    pub col: u32,
    pub len: u32,
    pub wid: u32,
    pub pixels: Vec<u8>,
}

pub fn extract_block(img: &LabeledImage, spec: &PartitionSpec, pos: (u32, u32)) -> Result<Block> {
    spec.check_image(img)?;
    spec.check_position(pos.0, pos.1)?;
    let row_bytes = spec.block_len as usize * CHANNELS;
    let mut pixels = Vec::with_capacity(row_bytes * spec.block_wid as usize);
    for span in block_row_spans(spec, pos) {
        pixels.extend_from_slice(&img.pixels[span]);
    }
    Ok(Block {
        row: pos.0,
        col: pos.1,
        len: spec.block_len,
        wid: spec.block_wid,
        pixels,
    })
}

pub fn write_block(
    img: &LabeledImage,
    spec: &PartitionSpec,
    pos: (u32, u32),
    blk: &Block,
) -> Result<LabeledImage> {
    spec.check_image(img)?;
    spec.check_position(pos.0, pos.1)?;
    let expected = spec.block_len as usize * spec.block_wid as usize * CHANNELS;
    if blk.len != spec.block_len || blk.wid != spec.block_wid || blk.pixels.len() != expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} block", spec.block_len, spec.block_wid),
            actual: format!("{}x{} block with {} bytes", blk.len, blk.wid, blk.pixels.len()),
        });
    }
    let mut out = img.clone();
    let row_bytes = spec.block_len as usize * CHANNELS;
    for (span, src) in block_row_spans(spec, pos).zip(blk.pixels.chunks_exact(row_bytes)) {
        out.pixels[span].copy_from_slice(src);
    }
    Ok(out)
}

/// Byte ranges, one per pixel row, covered by the block at `pos`.
pub(crate) fn block_row_spans(
    spec: &PartitionSpec,
    pos: (u32, u32),
) -> impl Iterator<Item = std::ops::Range<usize>> {
    let stride = spec.img_len as usize * CHANNELS;
    let row_bytes = spec.block_len as usize * CHANNELS;
    let x0 = pos.1 as usize * row_bytes;
    let y0 = pos.0 as usize * spec.block_wid as usize;
    (y0..y0 + spec.block_wid as usize).map(move |y| {
        let start = y * stride + x0;
        start..start + row_bytes
    })
}

/// Copy the block at `pos` from `src` into `dst`. Both buffers must hold a
/// canonical-size image for `spec`.
pub(crate) fn copy_block(dst: &mut [u8], src: &[u8], spec: &PartitionSpec, pos: (u32, u32)) {
    for span in block_row_spans(spec, pos) {
        dst[span.clone()].copy_from_slice(&src[span]);
    }
}

/// One row of keep/replace decisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementMask {
    bits: Vec<bool>,
}

impl ReplacementMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn replace(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn replaced_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DonorShortagePolicy {
    #[default]
    Error,
    SampleWithReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SingletonLabelPolicy {
    #[default]
    Error,
    PassthroughWithWarning,
}

pub const DEFAULT_DONORS: u32 = 10;
pub const DEFAULT_ROUNDS: u32 = 1;
pub const DEFAULT_REPLACE_PROB: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    /// Mixing rounds; round `t` mixes the output of round `t - 1`.
    pub rounds: u32,
    /// Donors sampled per target image.
    pub donors_per_image: u32,
    pub replace_prob: f64,
    /// `(length, width)`.
    pub canonical_size: (u32, u32),
    pub partition: PartitionSpec,
    pub master_seed: u64,
    pub donor_shortage_policy: DonorShortagePolicy,
    pub singleton_label_policy: SingletonLabelPolicy,
}

impl MixConfig {
    /// Config with default knobs (10 donors, 1 round, `p = 0.5`, seed 0).
    pub fn new(canonical_size: (u32, u32), block_len: u32, block_wid: u32) -> Result<Self> {
        let partition = derive_partition(canonical_size, block_len, block_wid)?;
        Ok(Self {
            rounds: DEFAULT_ROUNDS,
            donors_per_image: DEFAULT_DONORS,
            replace_prob: DEFAULT_REPLACE_PROB,
            canonical_size,
            partition,
            master_seed: 0,
            donor_shortage_policy: DonorShortagePolicy::default(),
            singleton_label_policy: SingletonLabelPolicy::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if self.donors_per_image < 1 {
            return Err(Error::InvalidConfig("donors per image must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.replace_prob) {
            return Err(Error::InvalidConfig(format!(
                "replacement probability {} is outside [0, 1]",
                self.replace_prob
            )));
        }
        if self.partition.canonical_size() != self.canonical_size {
            return Err(Error::InvalidConfig(format!(
                "partition is for {:?} but canonical size is {:?}",
                self.partition.canonical_size(),
                self.canonical_size
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quadrants() -> LabeledImage {
        // 4x4 image, 2x2 blocks; each quadrant a distinct colour.
        let mut px = Vec::new();
        for y in 0..4u8 {
            for x in 0..4u8 {
                let q = (y / 2) * 2 + x / 2;
                px.extend_from_slice(&[q * 10, q * 10 + 1, q * 10 + 2]);
            }
        }
        LabeledImage::new(4, 4, px, "a", "q").unwrap()
    }

    #[test]
    fn derive_partition_examples() {
        let p = derive_partition((192, 192), 96, 96).unwrap();
        assert_eq!((p.rows(), p.cols(), p.block_count()), (2, 2, 4));
        let p = derive_partition((192, 192), 48, 24).unwrap();
        assert_eq!((p.rows(), p.cols(), p.block_count()), (8, 4, 32));
        assert!(matches!(
            derive_partition((192, 192), 100, 96),
            Err(Error::NonDivisible { .. })
        ));
        assert!(matches!(derive_partition((192, 192), 0, 96), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rows_follow_block_wid() {
        let p = derive_partition((64, 32), 16, 8).unwrap();
        assert_eq!(p.rows(), 4);
        assert_eq!(p.cols(), 4);
        let p = derive_partition((64, 32), 32, 4).unwrap();
        assert_eq!((p.rows(), p.cols()), (8, 2));
    }

    #[test]
    fn image_invariants() {
        assert!(LabeledImage::new(0, 2, vec![], "a", "x").is_err());
        assert!(LabeledImage::new(2, 2, vec![0; 11], "a", "x").is_err());
        assert!(LabeledImage::new(2, 2, vec![0; 12], "", "x").is_err());
        assert!(LabeledImage::new(2, 2, vec![0; 12], "a", "x").is_ok());
    }

    #[test]
    fn extract_top_left_quadrant() {
        let img = quadrants();
        let spec = derive_partition((4, 4), 2, 2).unwrap();
        let b = extract_block(&img, &spec, (0, 0)).unwrap();
        assert_eq!(b.pixels, [0, 1, 2].repeat(4));
        let b = extract_block(&img, &spec, (1, 0)).unwrap();
        assert_eq!(b.pixels, [20, 21, 22].repeat(4));
    }

    #[test]
    fn extract_from_uniform_is_uniform() {
        let img = LabeledImage::uniform(12, 6, [128, 128, 128], "a", "g").unwrap();
        let spec = derive_partition((12, 6), 4, 3).unwrap();
        for pos in spec.positions() {
            let b = extract_block(&img, &spec, pos).unwrap();
            assert!(b.pixels.iter().all(|v| *v == 128));
        }
    }

    #[test]
    fn out_of_grid_and_shape_errors() {
        let img = quadrants();
        let spec = derive_partition((4, 4), 2, 2).unwrap();
        assert!(matches!(extract_block(&img, &spec, (2, 0)), Err(Error::OutOfGrid { .. })));
        assert!(matches!(extract_block(&img, &spec, (0, 2)), Err(Error::OutOfGrid { .. })));
        let blk = Block {
            row: 0,
            col: 0,
            len: 1,
            wid: 2,
            pixels: vec![0; 6],
        };
        assert!(matches!(write_block(&img, &spec, (0, 0), &blk), Err(Error::ShapeMismatch { .. })));
        let other = derive_partition((8, 8), 2, 2).unwrap();
        assert!(matches!(extract_block(&img, &other, (0, 0)), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn write_existing_block_is_noop() {
        let img = quadrants();
        let spec = derive_partition((4, 4), 2, 2).unwrap();
        let b = extract_block(&img, &spec, (1, 1)).unwrap();
        assert_eq!(write_block(&img, &spec, (1, 1), &b).unwrap(), img);
    }

    #[test]
    fn write_touches_only_one_quarter() {
        let img = LabeledImage::uniform(8, 8, [10, 10, 10], "a", "x").unwrap();
        let spec = derive_partition((8, 8), 4, 4).unwrap();
        let blk = Block {
            row: 0,
            col: 0,
            len: 4,
            wid: 4,
            pixels: vec![200; 48],
        };
        let out = write_block(&img, &spec, (0, 0), &blk).unwrap();
        let mut differing = 0;
        for y in 0..8 {
            for x in 0..8 {
                if out.pixel(x, y) != img.pixel(x, y) {
                    differing += 1;
                    assert!(x < 4 && y < 4);
                }
            }
        }
        assert_eq!(differing, spec.pixel_count() / 4);
    }

    #[test]
    fn config_validation() {
        let mut cfg = MixConfig::new((16, 16), 4, 4).unwrap();
        cfg.validate().unwrap();
        cfg.replace_prob = 1.5;
        assert!(cfg.validate().is_err());
        cfg.replace_prob = 0.5;
        cfg.rounds = 0;
        assert!(cfg.validate().is_err());
        cfg.rounds = 1;
        cfg.donors_per_image = 0;
        assert!(cfg.validate().is_err());
        cfg.donors_per_image = 1;
        cfg.canonical_size = (32, 16);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partition_serde_rejects_inconsistent_record() {
        let spec = derive_partition((192, 192), 48, 24).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"block_count\":32"));
        let back: PartitionSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let bad = json.replace("\"block_count\":32", "\"block_count\":31");
        assert!(serde_json::from_str::<PartitionSpec>(&bad).is_err());
    }

    fn divisor_triple() -> impl Strategy<Value = (u32, u32, u32, u32)> {
        (1u32..=12, 1u32..=12, 1u32..=8, 1u32..=8)
            .prop_map(|(cols, rows, bl, bw)| (cols * bl, rows * bw, bl, bw))
    }

    proptest! {
        #[test]
        fn block_count_identity((len, wid, bl, bw) in divisor_triple()) {
            let p = derive_partition((len, wid), bl, bw).unwrap();
            prop_assert_eq!(p.block_count() as u64 * (bl as u64 * bw as u64), p.pixel_count());
            prop_assert_eq!(p.rows() * bw, wid);
            prop_assert_eq!(p.cols() * bl, len);
        }

        #[test]
        fn split_and_reassemble_round_trips(
            (len, wid, bl, bw) in divisor_triple(),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let px: Vec<u8> = (0..len * wid * 3).map(|_| rng.random()).collect();
            let img = LabeledImage::new(len, wid, px, "a", "x").unwrap();
            let spec = derive_partition((len, wid), bl, bw).unwrap();
            let mut canvas = LabeledImage::uniform(len, wid, [0, 0, 0], "a", "x").unwrap();
            for pos in spec.positions() {
                let b = extract_block(&img, &spec, pos).unwrap();
                canvas = write_block(&canvas, &spec, pos, &b).unwrap();
                prop_assert_eq!(extract_block(&canvas, &spec, pos).unwrap(), b);
            }
            prop_assert_eq!(canvas, img);
        }
    }
}
