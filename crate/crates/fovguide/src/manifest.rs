//! Run manifests: what a command read and wrote, with SHA-256 digests.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::formats::{read_json, write_json};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactDigest {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: Config,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<ArtifactDigest>,
    pub outputs: Vec<ArtifactDigest>,
    /// Wall time per phase, s.
    pub wall_times: BTreeMap<String, f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn manifest_path(out: &Path, command: &str) -> PathBuf {
    out.join(format!("manifest.{command}.json"))
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Streams the file through SHA-256.
pub fn digest_file(out: &Path, rel: &str) -> Result<ArtifactDigest> {
    let path = out.join(rel);
    let mut file = File::open(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.clone()),
        _ => Error::io(&path, e),
    })?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(&path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(ArtifactDigest { path: rel.to_string(), sha256: hex(&hasher.finalize()), bytes })
}

impl RunManifest {
    pub fn new(command: &str, config: &Config) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_times: BTreeMap::new(),
        }
    }

    pub fn add_output(&mut self, out: &Path, rel: &str) -> Result<()> {
        self.outputs.push(digest_file(out, rel)?);
        Ok(())
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        write_json(&manifest_path(out, &self.command), self)
    }
}

/// Checks `files` against the manifest written by `upstream` and records them
/// as inputs of `into`.
pub fn verify_upstream(out: &Path, upstream: &str, files: &[&str], into: &mut RunManifest) -> Result<()> {
    let mpath = manifest_path(out, upstream);
    if !mpath.exists() {
        return Err(Error::MissingArtifact(mpath));
    }
    let m: RunManifest = read_json(&mpath)?;
    for rel in files {
        let recorded = m
            .outputs
            .iter()
            .find(|a| a.path == *rel)
            .ok_or_else(|| Error::MissingArtifact(out.join(rel)))?;
        let now = digest_file(out, rel)?;
        if now.sha256 != recorded.sha256 {
            return Err(Error::DigestMismatch { path: out.join(rel) });
        }
        into.inputs.push(now);
    }
    Ok(())
}
