//! Atomic file output and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use rankone::Error;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Writes `contents` through a temporary file in the target directory and
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Error> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// `path` with `suffix` appended to its file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Reads a file and records its digest.
pub struct Inputs {
    digests: Vec<(String, String)>,
}

impl Inputs {
    pub fn new() -> Self {
        Self {
            digests: Vec::new(),
        }
    }

    pub fn read(&mut self, path: &Path) -> Result<String, Error> {
        let text = rankone::io::read_file(path)?;
        self.digests
            .push((path.display().to_string(), sha256_hex(text.as_bytes())));
        Ok(text)
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.digests
                .iter()
                .map(|(p, d)| json!({ "path": p, "sha256": d }))
                .collect(),
        )
    }
}

/// Writes `<out>.manifest.json` describing how `out` was produced.
pub fn write_manifest(
    out: &Path,
    subcommand: &str,
    config: Value,
    inputs: &Inputs,
    seed: Option<u64>,
    outputs: &[&Path],
) -> Result<(), Error> {
    let mut files = Vec::new();
    for p in outputs {
        let text = rankone::io::read_file(p)?;
        files.push(
            json!({ "path": p.display().to_string(), "sha256": sha256_hex(text.as_bytes()) }),
        );
    }
    let manifest = json!({
        "subcommand": subcommand,
        "config": config,
        "inputs": inputs.to_json(),
        "outputs": files,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&sidecar(out, ".manifest.json"), &text)
}
