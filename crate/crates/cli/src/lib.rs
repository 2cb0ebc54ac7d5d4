//! Experiment toolchain around `azsr-core`: synthetic capture, IAA labeling,
//! training, map export, evaluation and latency benchmarks.

pub mod app;
pub mod bench;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod infer;
pub mod label;
pub mod simulate;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

/// Sub-streams of the experiment seed. Every random draw in a command comes
/// from `derive_seed(derive_seed(seed, STREAM), index)`.
pub mod streams {
    pub const SIMULATE: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const BENCH: u64 = 3;
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:05}")
}

pub(crate) fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::runtime(format!("invalid {}: {e}", path.display())))
}

pub(crate) fn require_exists(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::validation(format!("{what} {} does not exist", path.display())))
    }
}

/// Files in `dir` with the given extension, sorted by name.
pub(crate) fn files_with_extension(dir: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::runtime(format!("cannot list {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub(crate) fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    if workers == 0 {
        return Err(CliError::validation("--workers must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}
