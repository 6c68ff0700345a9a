use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside kernel domain: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("kernel matrix is singular after applying the eigenvalue floor")]
    SingularMatrix,

    #[error("degenerate log-log fit: {0}")]
    DegenerateFit(String),

    #[error("conditional model violates |f*(x)| <= 1 at x = {at:?} (f* = {value})")]
    Model { at: Vec<f64>, value: f64 },

    #[error("codebook search exhausted after {draws} draws ({found} of {wanted} codewords)")]
    SearchExhausted {
        draws: usize,
        found: usize,
        wanted: usize,
    },

    #[error("malformed data file: {0}")]
    Format(String),

    #[error("label byte {label} out of range at record {record}")]
    Label { record: usize, label: u8 },

    #[error("need {wanted} points from the requested classes, found {available}")]
    InsufficientData { wanted: usize, available: usize },

    #[error("image {index} has no nonzero pixels and cannot be normalized")]
    ZeroImage { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("replicate {replicate} (n = {n}): {source}")]
    Replicate {
        n: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_replicate(self, n: usize, replicate: usize) -> Self {
        Error::Replicate {
            n,
            replicate,
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Io { .. } => 3,
            Error::Format(_) | Error::Label { .. } => 4,
            Error::InsufficientData { .. } | Error::ZeroImage { .. } => 5,
            Error::Domain(_) | Error::Model { .. } => 6,
            Error::Numerical(_) | Error::SingularMatrix | Error::DegenerateFit(_) => 7,
            Error::SearchExhausted { .. } => 8,
            Error::Replicate { source, .. } => source.exit_code(),
        }
    }
}
