//! Run manifests: every command writes one next to its outputs, and
//! `raking replay <manifest>` re-executes the recorded invocation.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector after the program name; replaying feeds this
    /// back through the parser.
    pub argv: Vec<String>,
    pub master_seed: Option<u64>,
    pub version: String,
    pub format_version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    master_seed: Option<u64>,
    started: chrono::DateTime<chrono::Utc>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn start(command: &str, master_seed: Option<u64>) -> Self {
        let argv: Vec<String> = std::env::args().skip(1).collect();
        Self {
            command: command.to_string(),
            argv,
            master_seed,
            started: chrono::Utc::now(),
            outputs: Vec::new(),
        }
    }

    /// Override the recorded argv (used by replay so the manifest of a
    /// replayed run records the original invocation, not `replay ...`).
    pub fn with_argv(mut self, argv: Vec<String>) -> Self {
        self.argv = argv;
        self
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write(self, out_dir: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            argv: self.argv,
            master_seed: self.master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: FORMAT_VERSION.to_string(),
            started: self.started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
        };
        let path = out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    Ok(serde_json::from_str(&raw)?)
}
