//! Reproducibility manifests and artifact writing.
//!
//! Each command writes one manifest next to its artifacts. It holds the
//! resolved configuration, hashes of every input, and hashes of every file
//! written. It has no timestamps or host details, so two runs with the same
//! inputs and flags produce byte-identical manifests.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use toxmoral::evaluation::Aggregation;
use toxmoral::features::FeatureSet;
use toxmoral::models::ModelConfig;

use crate::Failure;

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<String>,
    pub out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_set: Option<FeatureSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_chars: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_per_class: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_out: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    /// Input name to SHA-256 (files) or resource fingerprint.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name to SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(config: RunConfig, inputs: BTreeMap<String, String>) -> Self {
        Manifest {
            tool: "toxmoral",
            version: env!("CARGO_PKG_VERSION"),
            config,
            inputs,
            outputs: BTreeMap::new(),
        }
    }

    /// Writes `bytes` to `path` and records its hash.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), Failure> {
        write_file(path, bytes)?;
        self.record(path, bytes);
        Ok(())
    }

    /// Records a file some other writer produced.
    pub fn record_existing(&mut self, path: &Path) -> Result<(), Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
        self.record(path, &bytes);
        Ok(())
    }

    fn record(&mut self, path: &Path, bytes: &[u8]) {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.outputs.insert(name, sha256_hex(bytes));
    }

    pub fn save(&self, path: &Path) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        write_file(path, s.as_bytes())
    }
}

/// `<file>.manifest.json` for single-file artifacts.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Atomic write: a temporary file in the target directory, then rename.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Failure::io(path, e))?;
    tmp.persist(path).map_err(|e| Failure::io(path, e.error))?;
    Ok(())
}
