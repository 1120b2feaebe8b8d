use std::path::PathBuf;

use motion_lingua::PipelineConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub episodes: usize,
    pub steps: usize,
    pub skipped_episodes: usize,
    pub skipped_steps: usize,
    pub records: usize,
}

impl Counts {
    pub fn reconciles(&self) -> bool {
        self.records + self.skipped_steps == self.steps
    }
}

/// Summary printed to stdout after every command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub inputs: Vec<PathBuf>,
    pub config_digest: String,
    pub stats_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub counts: Counts,
    pub wall_time_secs: f64,
}

/// SHA-256 of the resolved config in its canonical TOML form.
pub fn config_digest(cfg: &PipelineConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml_string().as_bytes()))
}
