use std::path::PathBuf;

use lfsynth_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LfError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Tensor(#[from] TensorError),
    #[error("invalid light field: {0}")]
    Invalid(String),
    #[error("extent mismatch: {0}")]
    ExtentMismatch(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("{path}: truncated payload, expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{path}: non-finite sample at [v={v}][u={u}][y={y}][x={x}][c={c}]")]
    NonFiniteSample {
        path: PathBuf,
        v: usize,
        u: usize,
        y: usize,
        x: usize,
        c: usize,
    },
    #[error("png: {0}")]
    Png(String),
    #[error("missing view file {0}")]
    MissingView(PathBuf),
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("invalid network input: {0}")]
    Network(String),
    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },
    #[error("config: {0}")]
    Config(String),
    #[error("training diverged at step {step}: {term} = {value}")]
    NonFinite {
        step: u64,
        term: &'static str,
        value: f64,
    },
    #[error("evaluation: {0}")]
    Eval(String),
}

pub type Result<T, E = LfError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LfError {
    let path = path.into();
    move |source| LfError::Io { path, source }
}
