//! `mixmanifest.json`: the reproducibility record written next to every
//! mixed tree.
//!
//! The per-image audit section names the donors behind every block, which
//! is exactly what a restore attack needs. It is only written on explicit
//! request and should not travel with a released dataset.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::mixer::{LabelCount, MixOutput, MixProvenance};
use crate::model::{MixConfig, RESIZE_FILTER};

pub const MANIFEST_FILE: &str = "mixmanifest.json";
pub const FORMAT_VERSION: u32 = 1;
pub const DONOR_POOL: &str = "original";

pub fn tool_version() -> String {
    format!("blockmix {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAudit {
    pub source_id: String,
    pub label: String,
    pub rounds: Vec<MixProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub master_seed: u64,
    pub config: MixConfig,
    pub resize_filter: String,
    pub donor_pool: String,
    pub census: Vec<LabelCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<Vec<ImageAudit>>,
}

impl MixManifest {
    /// Manifest for a finished run; always carries the audit trail, which
    /// [`write_manifest`] drops unless asked to keep it.
    pub fn from_run(config: &MixConfig, output: &MixOutput) -> Self {
        let audit = output
            .images
            .iter()
            .zip(&output.provenance)
            .map(|(img, rounds)| ImageAudit {
                source_id: img.source_id().to_owned(),
                label: img.label().to_owned(),
                rounds: rounds.clone(),
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            tool_version: tool_version(),
            master_seed: config.master_seed,
            config: config.clone(),
            resize_filter: RESIZE_FILTER.to_owned(),
            donor_pool: DONOR_POOL.to_owned(),
            census: output.census.clone(),
            augmentation: None,
            audit: Some(audit),
        }
    }

    pub fn redacted(&self) -> Self {
        Self {
            audit: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self, include_audit: bool) -> Result<String> {
        let body = if include_audit {
            serde_json::to_string_pretty(self)
        } else {
            serde_json::to_string_pretty(&self.redacted())
        };
        body.map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Parse {
            what: "manifest".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parse_err = |e: serde_json::Error| Error::Parse {
            what: "manifest".into(),
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Parse {
                what: "manifest".into(),
                message: "missing format_version".into(),
            })?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(parse_err)
    }
}

pub fn write_manifest(manifest: &MixManifest, path: &Path, include_audit: bool) -> Result<()> {
    let body = manifest.to_json(include_audit)?;
    fs::write(path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_manifest(path: &Path) -> Result<MixManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    MixManifest::from_json(&text)
}
