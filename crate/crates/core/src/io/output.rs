//! Output directory with per-file SHA-256 checksums and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.ini";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Telemetry {
    /// Not reproducible; excluded from every checksum.
    pub wall_clock_seconds: f64,
    pub events: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub files: Vec<FileEntry>,
    pub telemetry: Telemetry,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Directory `<root>/<subcommand>-seed<seed>` collecting run outputs.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path, subcommand: &str, seed: u64) -> Result<Self> {
        let dir = root.join(format!("{subcommand}-seed{seed}"));
        fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if self.files.iter().any(|f| f.name == name) || name == MANIFEST_FILE {
            return Err(Error::Io(format!("output '{name}' written twice")));
        }
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(FileEntry { name: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Writes the output of a `write_*`-style serializer.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Two-column data file.
    pub fn write_columns(&mut self, name: &str, header: (&str, &str), rows: &[(f64, f64)]) -> Result<()> {
        let mut text = format!("{},{}\n", header.0, header.1);
        for (a, b) in rows {
            text.push_str(&format!("{a},{b}\n"));
        }
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes the canonical config echo and the manifest.
    pub fn finish(
        mut self,
        subcommand: &str,
        config: &RunConfig,
        telemetry: Telemetry,
    ) -> Result<RunManifest> {
        self.write_bytes(CONFIG_FILE, config.render().as_bytes())?;
        let manifest = RunManifest {
            tool: "mislab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            seed: config.seed()?,
            config: config.effective().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            files: self.files.clone(),
            telemetry,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(manifest)
    }
}
