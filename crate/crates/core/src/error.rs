use std::path::PathBuf;

/// Errors produced by the analysis, optimization and simulation layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid AMC table: {0}")]
    InvalidTable(String),

    #[error("numeric failure in {what}: achieved residual {residual:e}")]
    Numeric { what: &'static str, residual: f64 },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("slow-fading assumption violated: transition {from}->{to} has probability {probability}")]
    SlowFadingViolation {
        from: usize,
        to: usize,
        probability: f64,
    },

    #[error("link `{0}` has zero spectrum access probability")]
    StarvedLink(&'static str),

    #[error("packet error probability is 1; a packet never gets through")]
    NeverSucceeds,

    #[error("expected service time diverges as the error probability {0} approaches 1")]
    Divergence(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("chain is reducible: state {from} cannot reach state {to}")]
    Reducible { from: usize, to: usize },

    #[error("{0} is undefined for a zero denominator")]
    Undefined(&'static str),

    #[error("delay budget {budget} is infeasible; minimum achievable delay is {min_delay}")]
    Infeasible { budget: f64, min_delay: f64 },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("analytic and simulated results are not comparable: {0}")]
    Comparability(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for this error class (1 model/numeric, 2 usage/config, 3 infeasible).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. } => 3,
            Error::Config { .. } => 2,
            _ => 1,
        }
    }
}
