//! Run manifests written next to every command's outputs.
//!
//! ```text
//! command = sweep
//! version = 0.1.0
//! seed = 2024
//! config.<key> = <resolved value>
//! output.<file>.sha256 = <hex digest>
//! ```
//!
//! A manifest is itself a valid configuration for its command: the
//! `config.` entries are read back by [`RunManifest::config_of`].

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::KeyValues;
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub seed: Option<u64>,
    pub config: KeyValues,
    pub outputs: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: KeyValues) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            config,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.push((name.to_string(), sha256_hex(bytes)));
    }

    pub fn to_entries(&self) -> KeyValues {
        let mut kv = KeyValues::new("manifest");
        kv.set("command", &self.command);
        kv.set("version", env!("CARGO_PKG_VERSION"));
        if let Some(seed) = self.seed {
            kv.set("seed", seed);
        }
        for (k, v) in self.config.entries() {
            kv.set(format!("config.{k}"), v);
        }
        for (name, digest) in &self.outputs {
            kv.set(format!("output.{name}.sha256"), digest);
        }
        kv
    }

    pub fn to_text(&self) -> String {
        self.to_entries().to_text()
    }

    /// Writes every output into `dir`, then the manifest.
    pub fn write_all(&mut self, dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, bytes) in files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(path, e))?;
            self.record(name, bytes);
        }
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Configuration carried by a manifest, or `kv` unchanged when it is
    /// not one. The manifest's seed is returned alongside.
    pub fn config_of(kv: KeyValues) -> (KeyValues, Option<u64>) {
        if !kv.contains("command") {
            return (kv, None);
        }
        let mut config = KeyValues::new(kv.origin());
        for (k, v) in kv.entries() {
            if let Some(key) = k.strip_prefix("config.") {
                config.set(key, v);
            }
        }
        let seed = kv.raw("seed").and_then(|s| s.parse().ok());
        (config, seed)
    }
}
