use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use otocml::Result;

/// Record of one invocation. Everything except `timestamps` is a function
/// of the command line and inputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub workers: usize,
    pub config: Value,
    pub outputs: Vec<PathBuf>,
    pub timestamps: Timestamps,
}

#[derive(Debug, Serialize)]
pub struct Timestamps {
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// `out.csv` maps to `out.csv.manifest.json`.
pub fn default_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        otocml::datasets::write_atomic(path, text.as_bytes())
    }
}
