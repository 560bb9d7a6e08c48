//! Per-invocation output directory and its manifest.

use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: String,
    pub started_at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    pub config_hash: String,
    pub overrides: Vec<String>,
    pub seeds: Value,
    pub inputs: Vec<String>,
    /// File names relative to the run directory.
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct RunDir {
    path: PathBuf,
    manifest: Manifest,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunDir {
    /// Creates `{out}/{timestamp}-seed{seed}` (suffixed if taken) and writes
    /// the initial manifest into it.
    pub fn create(out: &Path, seed: u64, mut manifest: Manifest) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let base = format!("{stamp}-seed{seed}");
        let mut path = out.join(&base);
        let mut n = 1;
        loop {
            match std::fs::create_dir(&path) {
                Ok(()) => break,
                Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                    path = out.join(format!("{base}-{n}"));
                    n += 1;
                }
                Err(e) => return Err(e).with_context(|| format!("creating {}", path.display())),
            }
        }
        manifest.started_at = now();
        manifest.status = "running".into();
        let run = Self { path, manifest };
        run.write()?;
        Ok(run)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn add_output(&mut self, name: impl Into<String>) {
        self.manifest.outputs.push(name.into());
    }

    pub fn set_seeds(&mut self, seeds: Value) -> Result<()> {
        self.manifest.seeds = seeds;
        self.write()
    }

    pub fn finish(mut self, status: &str, error: Option<String>) -> Result<()> {
        self.manifest.status = status.into();
        self.manifest.error = error;
        self.manifest.finished_at = Some(now());
        self.write()
    }

    fn write(&self) -> Result<()> {
        let path = self.path.join("manifest.json");
        pcr_engine::io::write_json(&path, &self.manifest).with_context(|| format!("writing {}", path.display()))
    }
}
