//! Output files: every table starts with a `# config_sha256=` comment line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// SHA-256 of the compact JSON form of the effective configuration.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String, CliError> {
    let text = serde_json::to_string(config).map_err(factrf::Error::from)?;
    Ok(format!("{:x}", Sha256::digest(text.as_bytes())))
}

pub struct OutDir {
    dir: PathBuf,
    hash: String,
}

impl OutDir {
    pub fn create(dir: &Path, hash: String) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Write a CSV body behind the provenance comment.
    pub fn write_table(&self, name: &str, body: &[u8]) -> Result<PathBuf, CliError> {
        let mut bytes = format!("# config_sha256={}\n", self.hash).into_bytes();
        bytes.extend_from_slice(body);
        self.write(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(factrf::Error::from)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(CliError::io(&path))?;
        Ok(path)
    }
}

/// Shortest round-trip form, empty for missing values.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}
