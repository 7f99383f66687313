//! `manifest.txt`: one per output directory, `key = value` lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use kdvbed::ensemble::sha256_hex;

use crate::CliError;

pub const FILE: &str = "manifest.txt";

#[derive(Clone, Debug)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<String>,
    /// Every config key with its resolved value, `output_dir` included.
    pub params: BTreeMap<String, String>,
    pub version: String,
    pub workers: Option<usize>,
    pub started: f64,
    pub finished: f64,
    pub files: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    /// Hash of the subcommand, tool version and every parameter except
    /// `output_dir`. Worker count and config path do not enter.
    pub fn config_hash(&self) -> String {
        let mut text = format!("subcommand = {}\nversion = {}\n", self.subcommand, self.version);
        for (k, v) in &self.params {
            if k != "output_dir" {
                text.push_str(&format!("{k} = {v}\n"));
            }
        }
        sha256_hex(text.as_bytes())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = String::new();
        text.push_str(&format!("subcommand = {}\n", self.subcommand));
        text.push_str(&format!("config = {}\n", self.config_path.as_deref().unwrap_or("(defaults)")));
        text.push_str(&format!("version = {}\n", self.version));
        text.push_str(&format!("config_hash = {}\n", self.config_hash()));
        let workers = self.workers.map_or_else(|| "default".to_string(), |w| w.to_string());
        text.push_str(&format!("workers = {workers}\n"));
        text.push_str(&format!("started_unix = {:.3}\n", self.started));
        text.push_str(&format!("finished_unix = {:.3}\n", self.finished));
        text.push_str(&format!("files = {}\n", self.files.join(", ")));
        text.push_str("\n[params]\n");
        for (k, v) in &self.params {
            text.push_str(&format!("{k} = {v}\n"));
        }
        let path = dir.join(FILE);
        fs::write(&path, text).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
    }
}
