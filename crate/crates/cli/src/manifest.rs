//! `manifest.json` written next to every run's outputs.

use crate::error::{CliError, CliResult};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub recipe: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub timings: Vec<StageTiming>,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects artifacts and timings for one command.
#[derive(Debug)]
pub struct Recorder {
    dir: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl Recorder {
    pub fn new(dir: &Path, command: Vec<String>, recipe: BTreeMap<String, String>) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command,
                recipe,
                inputs: Vec::new(),
                timings: Vec::new(),
                outputs: Vec::new(),
            },
            clock: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.manifest.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Close the current stage.
    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.manifest.timings.push(StageTiming {
            stage: stage.into(),
            seconds: (now - self.clock).as_secs_f64(),
        });
        self.clock = now;
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.push(name.into());
        Ok(path)
    }

    pub fn finish(self) -> CliResult<RunManifest> {
        for name in &self.manifest.outputs {
            let path = self.dir.join(name);
            if !path.is_file() {
                return Err(CliError::io(&path, std::io::ErrorKind::NotFound.into()));
            }
        }
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(self.manifest)
    }
}
