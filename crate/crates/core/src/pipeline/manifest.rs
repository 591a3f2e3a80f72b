use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats::read_file;
use crate::pipeline::PipelineConfig;

/// Lowercase hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Configuration as run, without the output directory.
    pub config: PipelineConfig,
    pub clip_sha256: String,
    pub input_view: usize,
    /// Row-major rotation applied to the clip, when augmentation is on.
    pub augmentation: Option<[[f64; 3]; 3]>,
    /// Frame jumps that run past the end of the clip.
    pub skipped_jumps: Vec<usize>,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format("manifest", e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub missing: Vec<String>,
    pub mismatched: Vec<String>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.missing.is_empty() && self.mismatched.is_empty()
    }
}

/// Re-hashes every artifact listed in `dir/manifest.json`.
pub fn verify_manifest(dir: &Path) -> Result<VerifyReport> {
    let bytes = read_file(&dir.join(super::MANIFEST_FILE))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::format("manifest", "not UTF-8"))?;
    let manifest = RunManifest::from_json(text)?;
    let mut report = VerifyReport::default();
    for a in &manifest.artifacts {
        report.checked += 1;
        match std::fs::read(dir.join(&a.path)) {
            Ok(data) if data.len() as u64 == a.bytes && digest(&data) == a.sha256 => {}
            Ok(_) => report.mismatched.push(a.path.clone()),
            Err(_) => report.missing.push(a.path.clone()),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(digest(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
