//! Run manifests: every command writes one next to its outputs so a run can
//! be audited and replayed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// What was run, with what, producing what. Re-running the same command with
/// the flags recorded here reproduces the listed outputs byte for byte; the
/// manifest itself is the one file that differs (wall time).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Seed the command ran with, when it takes one.
    pub seed: Option<u64>,
    /// All resolved flags, stringified, in sorted order.
    pub flags: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
}

/// Accumulates manifest fields while a command runs.
pub struct ManifestBuilder {
    command: String,
    seed: Option<u64>,
    flags: BTreeMap<String, String>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            seed: None,
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self.flag("seed", seed)
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.flags.insert(name.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Finalizes and writes the manifest (atomically, like every output).
    pub fn write(&self, path: &Path) -> exel_core::Result<()> {
        let manifest = RunManifest {
            command: self.command.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            flags: self.flags.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        exel_core::io::write_json(&manifest, path)
    }
}

/// Manifest location for a single-file output: `model.json` gets
/// `model.manifest.json` beside it.
pub fn manifest_for_file(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Manifest location for a directory output.
pub fn manifest_for_dir(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
