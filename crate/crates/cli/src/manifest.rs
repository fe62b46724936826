use std::fs;
use std::path::{Path, PathBuf};

use actinr::tasks::Study;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// What a run does, with every task-specific argument resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Task {
    Fit,
    Interp { stride: usize },
    Superres { spatial: usize, temporal: usize },
    Denoise { alpha: f64, read: f64, noise_seed: u64 },
    Inpaint { box_side: usize },
    Ablate { study: Study },
    FilterBias { window: usize },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Fit => "fit",
            Task::Interp { .. } => "interp",
            Task::Superres { .. } => "superres",
            Task::Denoise { .. } => "denoise",
            Task::Inpaint { .. } => "inpaint",
            Task::Ablate { .. } => "ablate",
            Task::FilterBias { .. } => "filter-bias",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub task: Task,
    /// Frame directory or model bundle; absent when a sweep runs on the built-in toy.
    pub input: Option<InputRecord>,
    pub out: PathBuf,
    pub channels: usize,
    pub seed: u64,
    /// Fully materialized flat config.
    pub config: Map<String, Value>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file, or of a directory's regular files in name order
/// (each entry hashed as name, NUL, length, NUL, bytes).
pub fn content_hash(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    let meta = fs::metadata(path).with_context(|| format!("cannot read {}", path.display()))?;
    if meta.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("cannot list {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.retain(|p| p.is_file());
        entries.sort();
        for p in entries {
            let bytes = fs::read(&p).with_context(|| format!("cannot read {}", p.display()))?;
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            h.update(name.as_bytes());
            h.update([0]);
            h.update(bytes.len().to_string().as_bytes());
            h.update([0]);
            h.update(&bytes);
        }
    } else {
        h.update(fs::read(path).with_context(|| format!("cannot read {}", path.display()))?);
    }
    Ok(hex(&h.finalize()))
}

pub fn record_input(path: &Path) -> Result<InputRecord> {
    if !path.exists() {
        bail!("input {} does not exist", path.display());
    }
    Ok(InputRecord {
        path: path.to_path_buf(),
        sha256: content_hash(path)?,
    })
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        let path = dir.join("manifest.json");
        fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))
    }

    /// Fails if the recorded input no longer has the recorded content.
    pub fn verify_input(&self) -> Result<()> {
        if let Some(rec) = &self.input {
            let now = content_hash(&rec.path)?;
            if now != rec.sha256 {
                bail!("input {} changed since the manifest was written", rec.path.display());
            }
        }
        Ok(())
    }
}
