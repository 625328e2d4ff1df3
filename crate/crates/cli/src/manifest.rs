use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::errors::CliResult;

/// Record of one invocation: the command, its fully resolved configuration
/// and a digest of every input file. Two runs with equal manifests produce
/// byte-identical outputs.
#[derive(Serialize)]
pub struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

impl RunManifest {
    pub fn new(command: &'static str, config: serde_json::Value) -> Self {
        RunManifest {
            tool: "navmetrics",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            inputs: Vec::new(),
        }
    }

    /// Configuration slot, filled once every default has been resolved.
    pub fn config_mut(&mut self) -> &mut serde_json::Value {
        &mut self.config
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        let digest = Sha256::digest(bytes);
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: format!("{digest:x}"),
        });
    }

    /// Writes the manifest next to `out`: `<out>.manifest.json` for a file
    /// output, `<out>/manifest.json` for a directory output.
    pub fn write_beside(&self, out: &Path, out_is_dir: bool) -> CliResult<PathBuf> {
        let path = if out_is_dir {
            out.join("manifest.json")
        } else {
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            out.with_file_name(name)
        };
        let mut text =
            serde_json::to_string_pretty(self).expect("manifest serialisation cannot fail");
        text.push('\n');
        crate::common::write_text(&path, &text)?;
        Ok(path)
    }
}
