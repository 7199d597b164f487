use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Lambda,
    Interaction,
    Collision,
    Evolve,
    ScanKz,
    VerifyReduction,
    Spectrum,
    Microsim,
    Regime,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Lambda => "lambda",
            Command::Interaction => "interaction",
            Command::Collision => "collision",
            Command::Evolve => "evolve",
            Command::ScanKz => "scan-kz",
            Command::VerifyReduction => "verify-reduction",
            Command::Spectrum => "spectrum",
            Command::Microsim => "microsim",
            Command::Regime => "regime",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub parameters: serde_json::Value,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// The raw bytes and their SHA-256, kept for the manifest.
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
}

pub fn parse_config(bytes: &[u8]) -> Result<LoadedConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Usage {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let hash = hex::encode(Sha256::digest(bytes));
    Ok(LoadedConfig { config, hash })
}

/// Strict parse of the command parameters; the error path is prefixed with
/// `parameters`.
pub fn parameters<T: DeserializeOwned>(value: &serde_json::Value) -> Result<T, CliError> {
    let value = if value.is_null() { serde_json::Value::Object(Default::default()) } else { value.clone() };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { "parameters".to_string() } else { format!("parameters.{inner}") };
        CliError::Usage { path, message: e.inner().to_string() }
    })
}
