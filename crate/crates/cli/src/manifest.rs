//! Run manifests and output-directory guarding.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    /// SHA-256 of the file, or of the sorted `(relative path, file digest)`
    /// listing for a directory.
    pub sha256: String,
    pub files: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub version: &'static str,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

/// Creates `out` and refuses to reuse a directory holding a manifest
/// unless `force` is set.
pub fn prepare_out_dir(out: &Path, force: bool) -> Result<()> {
    if out.join(MANIFEST_FILE).exists() && !force {
        bail!(
            "{} already contains {MANIFEST_FILE}; pass --force to overwrite",
            out.display()
        );
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

/// Digest of a file or of every file below a directory. Manifests inside
/// the directory are skipped because their timestamps differ per run.
pub fn digest_input(path: &Path) -> Result<InputDigest> {
    if path.is_file() {
        return Ok(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
            files: 1,
        });
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut hasher = Sha256::new();
    for rel in &files {
        hasher.update(rel.to_string_lossy().as_bytes());
        hasher.update([0]);
        hasher.update(sha256_file(&path.join(rel))?.as_bytes());
        hasher.update(b"\n");
    }
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(hasher.finalize()),
        files: files.len(),
    })
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

pub fn write_manifest(out: &Path, command: &str, config: &impl Serialize, inputs: &[&Path]) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        config: serde_json::to_value(config)?,
        inputs: inputs.iter().map(|p| digest_input(p)).collect::<Result<_>>()?,
        version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp(),
    };
    crate::report::write_json(&out.join(MANIFEST_FILE), &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        prepare_out_dir(&out, false).unwrap();
        fs::write(out.join("a.txt"), b"abc").unwrap();
        fs::create_dir(out.join("sub")).unwrap();
        fs::write(out.join("sub/b.txt"), b"def").unwrap();
        let before = digest_input(&out).unwrap();
        assert_eq!(before.files, 2);

        write_manifest(&out, "test", &serde_json::json!({}), &[]).unwrap();
        assert!(prepare_out_dir(&out, false).is_err());
        prepare_out_dir(&out, true).unwrap();
        // manifests do not enter directory digests
        assert_eq!(digest_input(&out).unwrap().sha256, before.sha256);

        let f = digest_input(&out.join("a.txt")).unwrap();
        assert_eq!(f.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
