//! Run-directory manifests: what was run and a digest of every output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Path of the effective-config snapshot, relative to the run directory.
    pub config: String,
    pub seed: u64,
    pub mode: String,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<FileEntry>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Collects every regular file below `dir` except the manifest itself,
/// sorted by relative path.
pub fn inventory(dir: &Path) -> Result<Vec<FileEntry>> {
    let mut paths = Vec::new();
    walk(dir, &mut paths)?;
    let mut out = Vec::new();
    for p in paths {
        let rel = p.strip_prefix(dir)?.to_string_lossy().replace('\\', "/");
        if rel == MANIFEST_FILE {
            continue;
        }
        let (sha256, bytes) = sha256_file(&p)?;
        out.push(FileEntry { path: rel, sha256, bytes });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = entry?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let p = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
    }
}

/// Problems found when checking a run directory against its manifest;
/// empty when every listed file is present with the recorded digest.
pub fn verify_dir(dir: &Path) -> Result<Vec<String>> {
    let m = RunManifest::read(dir)?;
    if !m.files.iter().any(|f| f.path == m.config) {
        bail!("manifest does not list its config snapshot {}", m.config);
    }
    let mut problems = Vec::new();
    for f in &m.files {
        let p = dir.join(&f.path);
        if !p.is_file() {
            problems.push(format!("missing: {}", f.path));
            continue;
        }
        let (sha, _) = sha256_file(&p)?;
        if sha != f.sha256 {
            problems.push(format!("digest mismatch: {}", f.path));
        }
    }
    Ok(problems)
}
