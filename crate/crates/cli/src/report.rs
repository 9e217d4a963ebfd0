use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::pipeline::StageError;

/// Writes report artifacts and records them for the manifest.
pub struct ReportWriter {
    dir: PathBuf,
    files: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Hash of the canonical (re-serialized) config.
pub fn config_hash(cfg: &PipelineConfig) -> Result<String> {
    Ok(sha256_hex(cfg.to_toml_string()?.as_bytes()))
}

impl ReportWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, f: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        f(&mut w)?;
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        self.bytes(name, &bytes)
    }

    /// Writes the resolved config and `manifest.json`: status, failing
    /// stage, seed, config hash, crate versions and a digest of every
    /// artifact.
    pub fn finish(mut self, cfg: &PipelineConfig, failure: Option<&StageError>) -> Result<()> {
        self.bytes("config.toml", cfg.to_toml_string()?.as_bytes())?;
        let mut outputs = Vec::new();
        let mut files = self.files.clone();
        files.sort();
        for name in &files {
            let bytes = std::fs::read(self.dir.join(name))?;
            outputs.push(json!({"file": name, "sha256": sha256_hex(&bytes)}));
        }
        let manifest = json!({
            "status": if failure.is_some() { "failed" } else { "ok" },
            "stage": failure.map(|f| f.stage.to_string()),
            "error": failure.map(|f| format!("{:#}", f.error)),
            "seed": cfg.seed,
            "config_sha256": config_hash(cfg)?,
            "versions": {
                "dnrisk-cli": env!("CARGO_PKG_VERSION"),
                "dnrisk-core": dnrisk::VERSION,
            },
            "outputs": outputs,
        });
        self.json("manifest.json", &manifest)
    }
}
