//! Run manifests: every subcommand writes `<name>.manifest.json` next to its
//! artifacts, recording the configuration hash, tool versions, wall time,
//! artifact digests, and a machine-readable summary. `report` aggregates the
//! manifests of one output directory and refuses to mix configurations.

use crate::config::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Versions {
    pub qhavg: String,
    pub runner: String,
    pub file_format: u32,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            qhavg: qhavg::VERSION.to_string(),
            runner: env!("CARGO_PKG_VERSION").to_string(),
            file_format: qhavg::io::FORMAT_VERSION,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub wall_time_ms: u128,
    pub exit_code: i32,
    pub artifacts: Vec<ArtifactEntry>,
    pub summary: serde_json::Value,
    pub notes: Vec<String>,
}

/// Hash of the scientific configuration: the whole config with the output
/// directory blanked (where artifacts land must not change what they mean).
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.run.out_dir = PathBuf::new();
    let bytes = serde_json::to_vec(&canonical).expect("config serializes");
    hex(&Sha256::digest(&bytes))
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects artifacts as they are written and assembles the manifest.
pub struct ManifestBuilder {
    out_dir: PathBuf,
    subcommand: String,
    config_hash: String,
    seed: u64,
    started: Instant,
    artifacts: Vec<ArtifactEntry>,
    pub notes: Vec<String>,
}

impl ManifestBuilder {
    pub fn new(out_dir: &Path, subcommand: &str, cfg: &ExperimentConfig) -> std::io::Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(ManifestBuilder {
            out_dir: out_dir.to_path_buf(),
            subcommand: subcommand.to_string(),
            config_hash: config_hash(cfg),
            seed: cfg.run.seed,
            started: Instant::now(),
            artifacts: Vec::new(),
            notes: Vec::new(),
        })
    }

    /// Write one artifact file and record its digest.
    pub fn write_artifact(&mut self, name: &str, contents: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)?;
        self.artifacts.push(ArtifactEntry {
            path: name.to_string(),
            sha256: hex(&Sha256::digest(contents)),
            bytes: contents.len() as u64,
        });
        Ok(path)
    }

    /// Write the manifest itself and return its path.
    pub fn finish(
        self,
        exit_code: i32,
        summary: serde_json::Value,
    ) -> std::io::Result<PathBuf> {
        let manifest = Manifest {
            subcommand: self.subcommand.clone(),
            config_hash: self.config_hash,
            seed: self.seed,
            versions: Versions::current(),
            wall_time_ms: self.started.elapsed().as_millis(),
            exit_code,
            artifacts: self.artifacts,
            summary,
            notes: self.notes,
        };
        let path = self.out_dir.join(format!("{}{MANIFEST_SUFFIX}", self.subcommand));
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Load every per-subcommand manifest in a directory (skipping the aggregate).
pub fn load_manifests(dir: &Path) -> std::io::Result<Vec<Manifest>> {
    let mut found = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry.file_name().to_string_lossy().into_owned();
        if !name.ends_with(MANIFEST_SUFFIX) || name == format!("report{MANIFEST_SUFFIX}") {
            continue;
        }
        let text = fs::read_to_string(entry.path())?;
        match serde_json::from_str::<Manifest>(&text) {
            Ok(m) => found.push(m),
            Err(e) => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{name}: {e}"),
                ))
            }
        }
    }
    Ok(found)
}
