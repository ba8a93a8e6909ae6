use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tensor `{name}`: {reason}")]
    InvalidTensor { name: String, reason: String },

    #[error("non-finite value in `{name}` at flat index {index}")]
    NonFinite { name: String, index: usize },

    #[error("shape mismatch in `{name}`: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("parameter `{name}` is {reason}")]
    ParameterMismatch { name: String, reason: String },

    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),

    #[error("empty parameter name")]
    EmptyName,

    #[error("missing manifest at {0}")]
    MissingManifest(PathBuf),

    #[error("malformed container: {0}")]
    Container(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("svd did not converge for a {rows}x{cols} matrix")]
    SvdConvergence { rows: usize, cols: usize },

    #[error("rank deficient input: effective rank {effective_rank} of {required} (tolerance {tolerance:e})")]
    RankDeficient {
        effective_rank: usize,
        required: usize,
        tolerance: f64,
    },

    #[error("input is not orthonormal: deviation {deviation:e} exceeds {tolerance:e}")]
    NotOrthonormal { deviation: f64, tolerance: f64 },

    #[error("zero matrix: {0}")]
    ZeroMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("layer `{layer}`: {source}")]
    Layer {
        layer: String,
        #[source]
        source: Box<Error>,
    },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_layer(self, layer: &str) -> Self {
        match self {
            e @ Error::Layer { .. } => e,
            other => Error::Layer {
                layer: layer.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// True for failures of the numerical kernels, as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SvdConvergence { .. }
            | Error::RankDeficient { .. }
            | Error::ZeroMatrix(_)
            | Error::Diverged { .. } => true,
            Error::Layer { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
