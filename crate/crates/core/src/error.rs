use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("block {block_len}x{block_wid} does not evenly divide image {img_len}x{img_wid}")]
    NonDivisible {
        img_len: u32,
        img_wid: u32,
        block_len: u32,
        block_wid: u32,
    },

    #[error("block position ({row}, {col}) is outside the {rows}x{cols} grid")]
    OutOfGrid {
        row: u32,
        col: u32,
        rows: u32,
        cols: u32,
    },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("donor set is empty")]
    EmptyDonorSet,

    #[error("donor `{donor}` has label `{donor_label}` but target has label `{target_label}`")]
    LabelMismatch {
        donor: String,
        donor_label: String,
        target_label: String,
    },

    #[error("label `{label}` has {available} donor candidates, {required} required")]
    DonorShortage {
        label: String,
        available: usize,
        required: usize,
    },

    #[error("label `{label}` has a single image and no donors")]
    SingletonLabel { label: String },

    #[error("duplicate source id `{0}`")]
    DuplicateSourceId(String),

    #[error("image {0}x{1} is smaller than the {2}x{2} SSIM window")]
    TooSmall(u32, u32, usize),

    #[error("datasets cannot be paired: {0}")]
    PairingMismatch(String),

    #[error("instance too large for enumeration: {block_count} blocks, category of {category_size} (limit 4)")]
    InstanceTooLarge {
        block_count: usize,
        category_size: usize,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(PathBuf),

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("manifest format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad input or configuration rather than by
    /// the environment.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
