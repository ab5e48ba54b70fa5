use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use pfl_core::io::write_json;

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_sha256: String,
    pub seeds: Vec<(String, u64)>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub wall_time_s: f64,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_bytes(&fs::read(path)?))
}

pub struct Recorder {
    start: Instant,
    command: String,
    args: Vec<String>,
    config_sha256: String,
    seeds: Vec<(String, u64)>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(command: &str, args: &[String]) -> Self {
        Self {
            start: Instant::now(),
            command: command.into(),
            args: args.to_vec(),
            config_sha256: String::new(),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) {
        let bytes = serde_json::to_vec(config).unwrap_or_default();
        self.config_sha256 = sha256_bytes(&bytes);
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.push((name.into(), value));
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Hashes every listed file and writes `manifest.json` into `dir`.
    pub fn finish(self, dir: &Path) -> pfl_core::Result<()> {
        let entries = |paths: &[PathBuf]| -> pfl_core::Result<Vec<FileEntry>> {
            paths
                .iter()
                .map(|p| Ok(FileEntry { path: p.display().to_string(), sha256: sha256_file(p)? }))
                .collect()
        };
        let manifest = RunManifest {
            command: self.command,
            args: self.args,
            config_sha256: self.config_sha256,
            seeds: self.seeds,
            inputs: entries(&self.inputs)?,
            outputs: entries(&self.outputs)?,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        write_json(&dir.join("manifest.json"), &manifest)
    }
}
