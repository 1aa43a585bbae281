//! Run configuration and file emission.

pub mod config;
pub mod output;

pub use config::{schema_help, RunConfig, SCHEMA};
pub use output::{sha256_hex, FileEntry, OutputDir, RunManifest, Telemetry, CONFIG_FILE, MANIFEST_FILE};
