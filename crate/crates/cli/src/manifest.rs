//! Run manifests: every command that writes an output file records what
//! produced it, with the full parameter set needed to reproduce it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub artifact_version: &'static str,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

/// Path of the manifest that accompanies `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn write_manifest(
    command: &'static str,
    parameters: serde_json::Value,
    seed: Option<u64>,
    outputs: &[&Path],
    started: Instant,
) -> std::io::Result<()> {
    let manifest = RunManifest {
        command,
        parameters,
        seed,
        artifact_version: env!("CARGO_PKG_VERSION"),
        outputs: outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    let path = manifest_path(outputs[0]);
    std::fs::write(path, serde_json::to_string_pretty(&manifest).unwrap())
}
