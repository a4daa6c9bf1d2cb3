use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Environment variable naming the root for auto-named run directories.
pub const RUN_ROOT_ENV: &str = "STPOTR_RUN_ROOT";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// `out_dir` if given, otherwise `<root>/<command>-<unix ms>` with the root
/// from the environment or `runs`.
pub fn run_dir(out_dir: Option<&Path>, command: &str) -> anyhow::Result<PathBuf> {
    let dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => {
            let root = std::env::var_os(RUN_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            root.join(format!("{command}-{}", (unix_now() * 1e3) as u128))
        }
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating run directory {}", dir.display()))?;
    Ok(dir)
}

/// Everything needed to rerun a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().collect(),
            config: Value::Null,
            seed: None,
            started_unix_s: unix_now(),
            finished_unix_s: 0.0,
            artifacts: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn artifact(&mut self, dir: &Path, path: &Path) {
        let rel = path.strip_prefix(dir).unwrap_or(path);
        self.artifacts.push(rel.display().to_string());
    }

    pub fn finish(mut self, dir: &Path) -> anyhow::Result<()> {
        self.finished_unix_s = unix_now();
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&self)?)
            .with_context(|| format!("writing {}", path.display()))
    }
}
