//! `manifest.json`: the fully resolved configuration of a run plus digests
//! of its inputs and outputs. `rssi-doa --manifest <file>` repeats the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Cli;
use crate::commands::Outputs;
use crate::CliError;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config: Cli,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn io_err(path: &Path, e: impl ToString) -> CliError {
    CliError::Io { path: path.display().to_string(), msg: e.to_string() }
}

fn digest(path: &Path, shown: String) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let hash = Sha256::digest(&bytes);
    Ok(FileDigest { path: shown, bytes: bytes.len() as u64, sha256: hash.iter().map(|b| format!("{b:02x}")).collect() })
}

pub fn write(cli: &Cli, subcommand: &str, out_dir: &Path, outputs: &Outputs) -> Result<(), CliError> {
    let mut inputs: Vec<&PathBuf> = outputs.inputs.iter().collect();
    inputs.dedup();
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand.to_string(),
        seed: cli.seed,
        config: cli.clone(),
        inputs: inputs.iter().map(|p| digest(p, p.display().to_string())).collect::<Result<_, _>>()?,
        outputs: outputs.files.iter().map(|f| digest(&out_dir.join(f), f.clone())).collect::<Result<_, _>>()?,
    };
    let path = out_dir.join(FILE_NAME);
    let text = serde_json::to_string_pretty(&m).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

pub fn load(path: &Path) -> Result<Manifest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if m.version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest written by version {}, running {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    Ok(m)
}
