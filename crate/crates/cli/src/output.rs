//! Output directory handling and run manifests.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files into one directory, refusing to replace existing files
/// unless `overwrite` is set.
pub struct OutputDir {
    dir: PathBuf,
    overwrite: bool,
    written: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
}

impl OutputDir {
    /// Fails before any work is done if one of `names` already exists.
    pub fn prepare(dir: &Path, overwrite: bool, names: &[String]) -> Result<Self> {
        if !overwrite {
            let existing: Vec<&str> = names
                .iter()
                .filter(|n| dir.join(n).exists())
                .map(String::as_str)
                .collect();
            if !existing.is_empty() {
                bail!(
                    "refusing to overwrite {} in {} (pass --overwrite): {}",
                    if existing.len() == 1 { "a file" } else { "files" },
                    dir.display(),
                    existing.join(", ")
                );
            }
        }
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            overwrite,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        if !self.overwrite && path.exists() {
            bail!("refusing to overwrite {} (pass --overwrite)", path.display());
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(OutputFile {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn written(&self) -> &[OutputFile] {
        &self.written
    }
}

/// Everything needed to regenerate a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of `config_toml`.
    pub config_hash: String,
    /// Effective configuration after flag overrides.
    pub config_toml: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig, started_unix_s: f64, outputs: &[OutputFile]) -> Result<Self> {
        let config_toml = cfg.to_toml_string()?;
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: cfg.seed,
            config_hash: sha256_hex(config_toml.as_bytes()),
            config_toml,
            started_unix_s,
            finished_unix_s: unix_now(),
            outputs: outputs.to_vec(),
        })
    }

    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::from_toml_str(&self.config_toml)
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_to_clobber() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "x").unwrap();
        let names = vec!["a.txt".to_string(), "b.txt".to_string()];
        let err = OutputDir::prepare(dir.path(), false, &names).err().unwrap();
        assert!(err.to_string().contains("a.txt"));
        let mut out = OutputDir::prepare(dir.path(), true, &names).unwrap();
        out.write("a.txt", b"y").unwrap();
        assert_eq!(std::fs::read(dir.path().join("a.txt")).unwrap(), b"y");
        assert_eq!(out.written()[0].sha256, sha256_hex(b"y"));
    }

    #[test]
    fn manifest_recovers_config() {
        let cfg = RunConfig {
            seed: 77,
            ..RunConfig::default()
        };
        let m = Manifest::new("simulate", &cfg, 0.0, &[]).unwrap();
        assert_eq!(m.config().unwrap(), cfg);
        assert_eq!(m.config_hash.len(), 64);
    }
}
