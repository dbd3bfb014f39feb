use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity error: {n} spins outside supported range {min}..={max}")]
    Capacity { n: usize, min: usize, max: usize },

    #[error("invalid chain parameter `{key}`: {reason}")]
    InvalidParameter { key: &'static str, reason: String },

    #[error(
        "disorder sampling aborted after {attempts} consecutive rejections \
         (sigma_p = {sigma_nm} nm, min_separation = {min_separation_nm} nm)"
    )]
    RejectionLimit {
        attempts: u32,
        sigma_nm: f64,
        min_separation_nm: f64,
    },

    #[error("eigensolver failed to converge on {dim}x{dim} matrix (frobenius norm {frobenius_norm:.6e})")]
    NoConvergence { dim: usize, frobenius_norm: f64 },

    #[error("manifold overlap at sigma_p = {sigma_nm} nm: {detail} (states {states:?})")]
    ManifoldOverlap {
        sigma_nm: f64,
        states: Vec<usize>,
        detail: String,
    },

    #[error("realization failed (n = {n}, sigma_p = {sigma_nm} nm, index = {index}, seed = {seed:#018x}): {source}")]
    Realization {
        n: usize,
        sigma_nm: f64,
        index: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error for `{key}`: {reason}")]
    Usage { key: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {path}: {reason}")]
    Parse { path: String, reason: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Usage {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for the manifold-overlap failure, possibly wrapped in realization provenance.
    pub fn is_manifold_overlap(&self) -> bool {
        match self {
            Error::ManifoldOverlap { .. } => true,
            Error::Realization { source, .. } => source.is_manifold_overlap(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
