//! Report emission: CSV and JSON artifacts with recorded content hashes.
//!
//! - Floats print via `Display`, the shortest decimal that parses back to
//!   the same bits; NaN and `None` become empty cells.
//! - Every artifact is hashed as written, so the run manifest can prove
//!   byte-identical reruns.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

pub const MANIFEST_VERSION: u32 = 1;

/// Shortest round-trip decimal; NaN becomes an empty cell.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Optional float; `None` becomes an empty cell.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Writes artifacts under one output directory and records their hashes.
pub struct ArtifactWriter {
    out_dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl ArtifactWriter {
    pub fn new(out_dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| {
            CliError::Validation(format!("cannot create {}: {e}", out_dir.display()))
        })?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Relative path -> content hash for every artifact written so far.
    pub fn hashes(&self) -> &BTreeMap<String, String> {
        &self.hashes
    }

    /// Writes bytes under a relative path, creating subdirectories.
    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.out_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::Runtime(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.hashes.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Writes a CSV artifact from one header row and stringified data rows.
    pub fn write_csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)
            .map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
        for row in rows {
            if row.len() != header.len() {
                return Err(CliError::Runtime(format!(
                    "{rel}: row has {} fields, header has {}",
                    row.len(),
                    header.len()
                )));
            }
            w.write_record(row)
                .map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
        self.write_bytes(rel, &bytes)
    }

    /// Writes plain text lines joined with newlines.
    pub fn write_text(&mut self, rel: &str, lines: &[String]) -> CliResult<()> {
        let mut body = lines.join("\n");
        body.push('\n');
        self.write_bytes(rel, body.as_bytes())
    }
}

/// A stage that stopped the run, with the error it raised.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailedStage {
    pub stage: String,
    pub error: String,
}

/// Run provenance: inputs, configuration, and artifact hashes.
///
/// Contains no timestamps or absolute paths, so the same configuration and
/// seed produce a byte-identical manifest anywhere.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub country: String,
    pub seed: u64,
    /// Hash of the effective run configuration (after CLI overrides).
    pub config_sha256: String,
    /// Hash of the master CSV; absent for runs that never read it.
    pub master_sha256: Option<String>,
    pub completed_stages: Vec<String>,
    pub failed_stage: Option<FailedStage>,
    /// Relative artifact path -> content hash.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}

/// Writes `manifest.json` at the output root (not itself an artifact).
pub fn write_manifest(out_dir: &Path, manifest: &Manifest) -> CliResult<()> {
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json())
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
