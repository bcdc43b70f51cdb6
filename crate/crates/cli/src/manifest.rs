use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use objreid_core::formats::to_jsonl;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub instances: usize,
    pub observations: usize,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, ClassCounts>,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    /// Record the hash of an input file or directory under its given path.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(path.display().to_string(), hash_path(path)?);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.diagnostics.insert(key.to_string(), serde_json::to_value(value).expect("serializable note"));
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// File hash, or for a directory the hash of its sorted `relpath sha` listing.
pub fn hash_path(path: &Path) -> Result<String, CliError> {
    if path.is_dir() {
        let mut lines = Vec::new();
        collect(path, path, &mut lines)?;
        lines.sort();
        Ok(sha256_hex(lines.join("\n").as_bytes()))
    } else {
        Ok(sha256_hex(&fs::read(path).map_err(|e| io_err(path, e))?))
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let p = entry.map_err(|e| io_err(dir, e))?.path();
        if p.is_dir() {
            collect(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).expect("walked path is under root");
            out.push(format!("{} {}", rel.display(), sha256_hex(&fs::read(&p).map_err(|e| io_err(&p, e))?)));
        }
    }
    Ok(())
}

/// Output directory that remembers the hash of everything written to it.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(Self { root: root.to_path_buf(), written: BTreeMap::new() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
        self.written.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("serializable output");
        s.push('\n');
        self.write(rel, s.as_bytes())
    }

    pub fn write_jsonl<T: Serialize>(&mut self, rel: &str, items: &[T]) -> Result<(), CliError> {
        self.write(rel, to_jsonl(items).as_bytes())
    }

    /// Record a file written by other means.
    pub fn record(&mut self, rel: &str) -> Result<(), CliError> {
        let p = self.root.join(rel);
        self.written.insert(rel.to_string(), sha256_hex(&fs::read(&p).map_err(|e| io_err(&p, e))?));
        Ok(())
    }

    /// Write `config.toml` and `manifest.json`, listing every output.
    pub fn finish(mut self, mut manifest: Manifest, cfg: &RunConfig) -> Result<Manifest, CliError> {
        self.write("config.toml", cfg.to_toml().as_bytes())?;
        manifest.outputs = self.written.clone();
        self.write_json("manifest.json", &manifest)?;
        Ok(manifest)
    }
}
