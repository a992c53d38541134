//! TOML parameter and scenario files.

use std::fs;
use std::path::{Path, PathBuf};

use hcdr_core::{HcdrParams, ScenarioConfig};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{}: file not found", .0.display())]
    Missing(PathBuf),
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

/// File contents together with their SHA-256.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub sha256: String,
}

pub fn read_text(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            InputError::Missing(path.to_path_buf())
        } else {
            InputError::Read {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, InputError> {
    let text = read_text(path)?;
    let value = toml::from_str(&text).map_err(|e| InputError::Parse {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })?;
    Ok(Loaded {
        value,
        sha256: sha256_hex(text.as_bytes()),
    })
}

/// Parse a parameter file. Validation is left to the caller.
pub fn load_params(path: &Path) -> Result<Loaded<HcdrParams>, InputError> {
    load(path)
}

/// Parse a scenario file. Validation is left to the caller.
pub fn load_scenario(path: &Path) -> Result<Loaded<ScenarioConfig>, InputError> {
    load(path)
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("config types serialize to TOML")
}
