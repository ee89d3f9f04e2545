use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smmc::Result;

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Content hashes of what one subcommand read and wrote, keyed by file
/// name relative to the run directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// `manifest.json` of a run directory. Re-running a subcommand replaces
/// its step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub steps: BTreeMap<String, Step>,
}

impl Manifest {
    pub const FILE: &'static str = "manifest.json";

    fn new(config_json: &str) -> Result<Self> {
        Ok(Self {
            tool: "smmc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: sha256_hex(config_json.as_bytes()),
            config: serde_json::from_str(config_json)?,
            steps: BTreeMap::new(),
        })
    }

    /// Records `step` under `command`, hashing the named files in `dir`.
    pub fn record(dir: &Path, config_json: &str, command: &str, inputs: &[&str], outputs: &[&str]) -> Result<()> {
        let path = dir.join(Self::FILE);
        let mut m = match std::fs::read_to_string(&path) {
            Ok(text) => {
                let mut m: Manifest = serde_json::from_str(&text)?;
                m.config_sha256 = sha256_hex(config_json.as_bytes());
                m.config = serde_json::from_str(config_json)?;
                m
            }
            Err(_) => Self::new(config_json)?,
        };
        let hash_all = |names: &[&str]| -> Result<BTreeMap<String, String>> {
            names.iter().map(|n| Ok((n.to_string(), file_sha256(&dir.join(n))?))).collect()
        };
        let step = Step { inputs: hash_all(inputs)?, outputs: hash_all(outputs)? };
        m.steps.insert(command.to_string(), step);
        std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(Self::FILE))?)?)
    }
}
