//! Atomic output directories with a content-hash manifest.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment_id: String,
    /// `complete` or `partial`.
    pub status: String,
    /// Outputs with missing cells or curve gaps.
    pub incomplete: Vec<String>,
    pub errors: Vec<String>,
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files gathered in memory (relative path to bytes) until committed.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: BTreeMap<String, Vec<u8>>,
    incomplete: Vec<String>,
    errors: Vec<String>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(path.into(), bytes.into());
    }

    pub fn mark_incomplete(&mut self, path: impl Into<String>, reason: impl Into<String>) {
        let p = path.into();
        if !self.incomplete.contains(&p) {
            self.incomplete.push(p);
        }
        self.errors.push(reason.into());
    }

    pub fn is_partial(&self) -> bool {
        !self.incomplete.is_empty()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.get(path).map(Vec::as_slice)
    }

    pub fn manifest(&self, experiment_id: &str) -> Manifest {
        Manifest {
            tool: "biasbench".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            experiment_id: experiment_id.into(),
            status: if self.is_partial() { "partial" } else { "complete" }.into(),
            incomplete: self.incomplete.clone(),
            errors: self.errors.clone(),
            files: self
                .files
                .iter()
                .map(|(p, b)| ManifestEntry { path: p.clone(), sha256: sha256_hex(b), bytes: b.len() as u64 })
                .collect(),
        }
    }

    /// Writes every file plus the manifest into a staging directory next to
    /// `out`, then renames it into place. On failure nothing is left behind.
    pub fn commit(&self, out: &Path, experiment_id: &str) -> io::Result<Manifest> {
        let manifest = self.manifest(experiment_id);
        let name = out
            .file_name()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("{} has no final component", out.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&parent)?;
        let pid = std::process::id();
        let staging = parent.join(format!(".{name}.staging-{pid}"));
        let result = (|| {
            std::fs::create_dir(&staging)?;
            for (p, bytes) in &self.files {
                let target = staging.join(p);
                if let Some(dir) = target.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(&target, bytes)?;
            }
            let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
            std::fs::write(staging.join(MANIFEST), text + "\n")?;
            if out.exists() {
                let old = parent.join(format!(".{name}.old-{pid}"));
                std::fs::rename(out, &old)?;
                if let Err(e) = std::fs::rename(&staging, out) {
                    let _ = std::fs::rename(&old, out);
                    return Err(e);
                }
                std::fs::remove_dir_all(&old)?;
            } else {
                std::fs::rename(&staging, out)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            let _ = std::fs::remove_dir_all(&staging);
            return Err(e);
        }
        Ok(manifest)
    }
}

/// Files whose bytes no longer match the manifest, with the reason.
pub fn verify_manifest(dir: &Path) -> io::Result<(Manifest, Vec<String>)> {
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(io::Error::other)?;
    let mut bad = Vec::new();
    for e in &manifest.files {
        match std::fs::read(dir.join(&e.path)) {
            Ok(b) if sha256_hex(&b) == e.sha256 => {}
            Ok(_) => bad.push(format!("{}: hash mismatch", e.path)),
            Err(err) => bad.push(format!("{}: {err}", e.path)),
        }
    }
    Ok((manifest, bad))
}
