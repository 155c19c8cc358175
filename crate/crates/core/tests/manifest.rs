use std::path::PathBuf;

use blockmix::manifest::{read_manifest, write_manifest, MixManifest, FORMAT_VERSION};
use blockmix::mixer::mix_dataset;
use blockmix::{synth, AugmentConfig, Error, MixConfig};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/mixmanifest.json")
}

fn fixed_manifest() -> MixManifest {
    let data = synth::random_dataset(4, 2, (8, 8), 1);
    let mut config = MixConfig::new((8, 8), 4, 4).unwrap();
    config.donors_per_image = 1;
    config.rounds = 2;
    config.master_seed = 2024;
    let out = mix_dataset(&data, &config).unwrap();
    let mut m = MixManifest::from_run(&config, &out);
    // Keep the golden file independent of the crate version.
    m.tool_version = "blockmix golden".into();
    m
}

/// Set `BLESS=1` to rewrite the golden file after an intended format change.
#[test]
fn matches_golden_file() {
    let text = fixed_manifest().to_json(true).unwrap();
    if std::env::var_os("BLESS").is_some() {
        std::fs::write(golden_path(), &text).unwrap();
    }
    let golden = std::fs::read_to_string(golden_path()).unwrap();
    assert_eq!(text, golden);
    assert_eq!(MixManifest::from_json(&golden).unwrap(), fixed_manifest());
}

#[test]
fn round_trip_and_redaction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let mut m = fixed_manifest();
    m.augmentation = Some(AugmentConfig::default());

    write_manifest(&m, &path, false).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains("\"audit\""));
    assert!(!text.contains("donor_ids"));
    assert_eq!(read_manifest(&path).unwrap(), m.redacted());

    write_manifest(&m, &path, true).unwrap();
    assert_eq!(read_manifest(&path).unwrap(), m);
}

#[test]
fn records_run_settings() {
    let m = fixed_manifest();
    let v: serde_json::Value = serde_json::from_str(&m.to_json(false).unwrap()).unwrap();
    assert_eq!(v["format_version"], FORMAT_VERSION);
    assert_eq!(v["master_seed"], 2024);
    assert_eq!(v["resize_filter"], "bilinear");
    assert_eq!(v["donor_pool"], "original");
    assert_eq!(v["config"]["rounds"], 2);
    assert_eq!(v["census"][0]["label"], "class0");
}

#[test]
fn version_guard() {
    let text = fixed_manifest().to_json(false).unwrap().replace("\"format_version\": 1", "\"format_version\": 9");
    assert!(matches!(
        MixManifest::from_json(&text),
        Err(Error::VersionMismatch { found: 9, expected: 1 })
    ));
    assert!(matches!(MixManifest::from_json("{}"), Err(Error::Parse { .. })));
    assert!(matches!(MixManifest::from_json("not json"), Err(Error::Parse { .. })));
}
