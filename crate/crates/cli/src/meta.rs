//! Run metadata written next to every output, so a result can be traced back
//! to its inputs. Inputs are identified by file name and SHA-256, never by
//! absolute path, which keeps outputs identical across checkouts.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use idsel::experiment::SelectorConfig;
use idsel::selectors::{Method, SelectionOrder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "idsel";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub file: String,
    pub sha256: String,
    /// Documents (corpora) or vectors (embeddings).
    pub records: usize,
}

impl InputFile {
    pub fn describe(role: &str, path: &Path, records: usize) -> io::Result<Self> {
        Ok(Self {
            role: role.to_string(),
            file: path
                .file_name()
                .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
            sha256: sha256_file(path)?,
            records,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderInfo {
    pub method: Method,
    /// Absent for deterministic methods.
    pub seed: Option<u64>,
    pub params_fingerprint: String,
    pub ranked: usize,
    pub truncated: bool,
}

impl OrderInfo {
    pub fn of(order: &SelectionOrder, seed: u64) -> Self {
        Self {
            method: order.method,
            seed: order.method.is_stochastic().then_some(seed),
            params_fingerprint: order.params_fingerprint.clone(),
            ranked: order.len(),
            truncated: order.truncated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub selectors: Vec<SelectorConfig>,
    pub base_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_shots: Option<Vec<usize>>,
    pub orders: Vec<OrderInfo>,
}

impl RunMeta {
    pub fn new(command: &str, base_seed: u64) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: Vec::new(),
            selectors: Vec::new(),
            base_seed,
            repeats: None,
            n_shots: None,
            orders: Vec::new(),
        }
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn digest_of_known_content() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"abc").unwrap();
        assert_eq!(
            sha256_file(f.path()).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn inputs_carry_no_directory() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pool.jsonl");
        std::fs::write(&p, "").unwrap();
        let info = InputFile::describe("corpus", &p, 0).unwrap();
        assert_eq!(info.file, "pool.jsonl");
    }
}
