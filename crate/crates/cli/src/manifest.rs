use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub started_unix: u64,
    pub elapsed_seconds: f64,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timings: Timings,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub struct ManifestBuilder {
    command: &'static str,
    started: Instant,
    started_unix: u64,
    inputs: Vec<InputHash>,
    config: serde_json::Value,
    seed: Option<u64>,
}

impl ManifestBuilder {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            inputs: Vec::new(),
            config: serde_json::Value::Null,
            seed: None,
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        if path.is_dir() {
            let mut files: Vec<PathBuf> =
                std::fs::read_dir(path)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
            files.sort();
            for f in files {
                self.input(&f)?;
            }
            return Ok(());
        }
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputHash { path: path.to_path_buf(), sha256 });
        Ok(())
    }

    pub fn config(&mut self, value: impl Serialize) {
        self.config = serde_json::to_value(value).expect("config serializes");
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn write(self, out_dir: &Path) -> std::io::Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            args: std::env::args().skip(1).collect(),
            config: self.config,
            inputs: self.inputs,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timings: Timings { started_unix: self.started_unix, elapsed_seconds: self.started.elapsed().as_secs_f64() },
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(out_dir.join("manifest.json"), text + "\n")
    }
}
