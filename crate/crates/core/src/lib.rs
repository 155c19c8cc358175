//! Label-based pixel block mixing for image classification datasets.
//!
//! Images of one class are cut into an even grid of blocks and blocks are
//! swapped, position for position, between images of the same class. The
//! mixed set keeps its class-level features for training while individual
//! images stop being recognisable.
//!
//! - [`model`]: images, partitions, configuration
//! - [`mixer`]: the seeded mixing pass
//! - [`ssim`]: structural similarity between original and mixed sets
//! - [`security`]: restore-attack probability bounds
//! - [`augment`]: flip / rotate / brighten variants
//! - [`dataset`], [`manifest`]: on-disk trees and run manifests
//! - [`bench`]: throughput sweeps

pub mod augment;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod mixer;
pub mod model;
pub mod security;
pub mod ssim;
pub mod synth;

pub use augment::{augment_dataset, brighten, flip, rotate, AugmentConfig};
pub use dataset::{load_dataset, save_dataset};
pub use error::{Error, Result};
pub use manifest::{read_manifest, write_manifest, MixManifest, MANIFEST_FILE};
pub use mixer::{
    generate_mask, mix_dataset, mix_dataset_with_workers, mix_image, BlockOutcome, DonorSet, MixOutput,
    MixProvenance,
};
pub use model::{
    derive_partition, extract_block, write_block, Block, DonorShortagePolicy, LabeledImage, MixConfig,
    PartitionSpec, ReplacementMask, SingletonLabelPolicy,
};
pub use security::{
    enumerate_reassemblies, restore_log_prob_category, restore_log_prob_total, CategoryCensus, RestoreBound,
};
pub use ssim::{dataset_ssim, ssim, SsimParams, SsimReport};
