use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched or unsupported dimensions (matrix shapes, grid sizes).
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Argument outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Config file rejected; `line` is 1-based.
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    /// Tabular input rejected; `row` and `column` are 1-based.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    /// Coordinate descent hit the sweep cap before reaching tolerance.
    #[error(
        "solver did not converge at lambda={lambda:.6e}: {sweeps} sweeps, \
         last max coefficient change {last_delta:.3e}"
    )]
    NonConvergence {
        lambda: f64,
        sweeps: usize,
        last_delta: f64,
    },

    /// Refusal to act on existing state (e.g. nonempty output directory).
    #[error("{0}")]
    Refused(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
