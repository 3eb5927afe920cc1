use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function it was passed to.
    #[error("{what} is outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("data error at line {line}, column {column}: {message}")]
    Data {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("no records in dataset")]
    EmptyDataset,

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("fit failed: {0}")]
    Fit(String),

    /// A log-density evaluated to a non-finite value for one record.
    #[error("non-finite log-density at row {row}: {value}")]
    Evaluation { row: usize, value: f64 },

    /// The optimizer exhausted its budget; carries the best point it saw.
    #[error("no convergence: {message} (best objective {best_value}, at {best_point:?})")]
    NonConvergence {
        message: String,
        best_point: Vec<f64>,
        best_value: f64,
    },

    #[error("quadrature did not converge: achieved relative change {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
}

impl Error {
    /// Numerical failures (as opposed to bad input) map to a distinct exit status in the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Fit(_)
                | Error::Evaluation { .. }
                | Error::NonConvergence { .. }
                | Error::Quadrature { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Data { .. } => "data",
            Error::EmptyDataset => "empty_dataset",
            Error::Io { .. } => "io",
            Error::Fit(_) => "fit",
            Error::Evaluation { .. } => "evaluation",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Quadrature { .. } => "quadrature",
        }
    }
}

pub(crate) fn domain(what: &'static str, value: f64) -> Error {
    Error::Domain { what, value }
}
