use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand lengths or tensor shapes disagree.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A layer or kernel cannot be applied to an input of the given shape.
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid algebra: {0}")]
    Validation(String),

    #[error("unknown algebra `{name}`; valid names are: {}", valid.join(", "))]
    UnknownAlgebra {
        name: String,
        valid: Vec<&'static str>,
    },

    /// An API was used outside its contract (non-scalar loss, missing gradients, ...).
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("model build failed: {0}")]
    Build(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
