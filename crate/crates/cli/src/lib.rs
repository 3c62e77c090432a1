//! Batch driver behind the `most` binary: localize feature directories,
//! evaluate boxes, render overlays, and cluster region descriptors.

pub mod config;
pub mod discover;
pub mod eval;
pub mod localize;
pub mod schema;
pub mod viz;

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("no inputs: {0}")]
    NoInputs(String),
    #[error("all {0} inputs failed")]
    AllFailed(usize),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NoInputs(_) | CliError::Usage(_) => 2,
            CliError::AllFailed(_) | CliError::Schema(_) | CliError::Io(_) => 1,
        }
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `-`.
pub fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    if path.as_os_str() == "-" {
        print!("{text}");
        return Ok(());
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs `f` on a dedicated pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Usage("workers must be ≥ 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(pool.install(f))
}
