use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared across the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the region where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller violated a precondition of the operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A quadrature or iteration stopped before reaching the requested accuracy.
    #[error("numerical degradation: achieved error {achieved:.3e} exceeds tolerance {requested:.3e} ({context})")]
    Degraded {
        achieved: f64,
        requested: f64,
        context: String,
    },

    /// A critical point or turning point is degenerate.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("no turning point of the potential inside the domain: {0}")]
    NoTurningPoint(String),

    /// The grid is too coarse for the wavelengths involved.
    #[error("resolution rule violated: need at least {required} grid points, got {given}")]
    Resolution { required: usize, given: usize },

    #[error("expression error: {0}")]
    Expr(String),

    #[error("configuration error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
