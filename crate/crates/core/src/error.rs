use crate::lmi::LmiError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: String,
        got: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("s0*I - A is singular or ill-conditioned (reciprocal condition {rcond:.3e})")]
    SingularShift { rcond: f64 },

    #[error("data matrix {name} is ill-conditioned (reciprocal condition {rcond:.3e})")]
    Conditioning { name: &'static str, rcond: f64 },

    #[error("conditioning check still failing after {attempts} attempts")]
    RetriesExhausted { attempts: u32 },

    #[error("LMI problem infeasible (best margin {best_margin:.3e})")]
    SynthesisInfeasible { best_margin: f64 },

    #[error("gain extraction failed: {name} has reciprocal condition {rcond:.3e}")]
    ExtractionSingular { name: &'static str, rcond: f64 },

    #[error(transparent)]
    Lmi(#[from] LmiError),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
