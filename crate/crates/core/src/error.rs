//! Error type shared by every stage of the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An inconsistent or unsupported structure / run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Configuration document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// The eigen-solver did not reach its residual target.
    #[error("eigen-solver did not converge at k-point {k_index} ({label}): residual {residual:.3e}")]
    NoConvergence {
        k_index: usize,
        label: String,
        residual: f64,
    },

    /// Field blow-up during time stepping.
    #[error("FDTD instability detected at step {step}: {detail}")]
    Unstable { step: usize, detail: String },

    /// A spectral peak too narrow for the FFT bin spacing.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A requested allocation would exceed the configured memory cap.
    #[error("resource error: {what} needs {required} bytes, cap is {cap} bytes")]
    Resource { what: String, required: u64, cap: u64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; upstream artifacts are kept on disk.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Domain(_) => 2,
            Error::Numeric(_) | Error::NoConvergence { .. } | Error::Unstable { .. } | Error::Resolution(_) => 3,
            Error::Resource { .. } => 4,
            Error::Io { .. } => 2,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
