//! Run directories: every artifact is staged in memory, then written in a
//! fixed order into a fresh directory together with its digest manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.push(name, bytes);
        Ok(())
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Config(format!("{name}: {e}"));
        w.write_record(header).map_err(fail)?;
        for r in rows {
            w.serialize(r).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        self.push(name, bytes);
        Ok(())
    }

    pub fn push(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub config: RunConfig,
    /// Seconds since the epoch; `SOURCE_DATE_EPOCH` pins it.
    pub created_unix: u64,
    pub passed: bool,
    pub files: Vec<FileDigest>,
}

impl RunManifest {
    /// Digest over the emitted files' digests, independent of the timestamp.
    pub fn content_digest(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.files {
            h.update(f.name.as_bytes());
            h.update([0]);
            h.update(f.sha256.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

fn staging_path(out: &Path) -> PathBuf {
    let name = out.file_name().map_or_else(|| "run".into(), |n| n.to_string_lossy().into_owned());
    out.with_file_name(format!(".{name}.partial"))
}

/// Writes `artifacts` and the manifest into `out`, which must not exist or
/// be empty. Nothing is left behind on failure.
pub fn write_run(
    out: &Path,
    command: &str,
    config: &RunConfig,
    artifacts: &Artifacts,
    passed: bool,
) -> Result<RunManifest, CliError> {
    if out.exists() {
        let empty = std::fs::read_dir(out).map_err(|e| CliError::io(out, e))?.next().is_none();
        if !empty {
            return Err(CliError::Config(format!("output directory {} is not empty", out.display())));
        }
    }
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config: config.clone(),
        created_unix: timestamp(),
        passed,
        files: artifacts
            .files
            .iter()
            .map(|(name, b)| FileDigest { name: name.clone(), sha256: sha256_hex(b), bytes: b.len() as u64 })
            .collect(),
    };
    let stage = staging_path(out);
    let result = (|| {
        if stage.exists() {
            std::fs::remove_dir_all(&stage).map_err(|e| CliError::io(&stage, e))?;
        }
        std::fs::create_dir_all(&stage).map_err(|e| CliError::io(&stage, e))?;
        for (name, bytes) in &artifacts.files {
            let p = stage.join(name);
            std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        }
        let mut m = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
        m.push(b'\n');
        let p = stage.join(MANIFEST);
        std::fs::write(&p, m).map_err(|e| CliError::io(&p, e))?;
        if out.exists() {
            std::fs::remove_dir(out).map_err(|e| CliError::io(out, e))?;
        }
        std::fs::rename(&stage, out).map_err(|e| CliError::io(out, e))
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_dir_all(&stage);
        return Err(e);
    }
    Ok(manifest)
}

/// Recomputes the digests of a written run and compares them with its manifest.
pub fn verify_run(out: &Path) -> Result<bool, CliError> {
    let p = out.join(MANIFEST);
    let text = std::fs::read(&p).map_err(|e| CliError::io(&p, e))?;
    let manifest: RunManifest =
        serde_json::from_slice(&text).map_err(|e| CliError::Parse { path: p.clone(), message: e.to_string() })?;
    for f in &manifest.files {
        let fp = out.join(&f.name);
        let bytes = std::fs::read(&fp).map_err(|e| CliError::io(&fp, e))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Ok(false);
        }
    }
    Ok(true)
}
