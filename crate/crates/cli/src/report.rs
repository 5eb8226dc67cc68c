use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use spinfid::io::write_atomic;
use spinfid::{Error, Result};

use crate::config::RunConfig;

pub const TOOL: &str = "spinfid";

/// An input file, identified by name and content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub name: String,
    pub sha256: String,
}

impl InputFile {
    pub fn read(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        Ok((Self { name, sha256: hex(&Sha256::digest(&bytes)) }, bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NotConverged,
}

/// Everything needed to reproduce a run: tool version, the fully resolved
/// configuration, hashed inputs and the command's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: Status,
    pub config: Value,
    pub inputs: Vec<InputFile>,
    /// SHA-256 over the input hashes, in order.
    pub provenance: String,
    pub payload: Value,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl ResultReport {
    pub fn new(command: &str, config: &RunConfig, inputs: Vec<InputFile>, status: Status, payload: impl Serialize) -> Self {
        let mut h = Sha256::new();
        for i in &inputs {
            h.update(i.sha256.as_bytes());
        }
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status,
            // going through Value sorts map keys, which keeps parse and
            // re-serialise stable
            config: serde_json::to_value(config).expect("config serialises"),
            inputs,
            provenance: hex(&h.finalize()),
            payload: serde_json::to_value(payload).expect("payload serialises"),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }
}
