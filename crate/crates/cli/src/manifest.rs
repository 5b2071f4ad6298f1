use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliResult;
use crate::io::{sha256_file, write_file};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything that determines a command's output. Paths are left out so that
/// relocated inputs with identical content give identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    /// Input role to SHA-256 of the file content.
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            command: command.to_string(),
            config,
            input_digests: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn add_input(&mut self, role: impl Into<String>, path: &Path) -> CliResult<()> {
        self.input_digests.insert(role.into(), sha256_file(path)?);
        Ok(())
    }

    pub fn save(&self, out_dir: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_file(&out_dir.join(MANIFEST_FILE), text.as_bytes())
    }
}
