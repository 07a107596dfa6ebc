use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix (det = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("nonpositive plastic determinant {det:e}{}", cell.map(|c| format!(" in cell {c}")).unwrap_or_default())]
    NonpositivePlasticDeterminant { det: f64, cell: Option<usize> },

    #[error("nonpositive temperature {0:e}")]
    NonpositiveTemperature(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at quadrature point {point} of cell {cell}")]
    QuadratureOverflow { cell: usize, point: usize },

    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("fixed-point iteration stalled after {iterations} iterations (update {update:e}); reduce dt")]
    FixedPointDivergence { iterations: usize, update: f64 },

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("{0}")]
    Validation(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("at t = {t}: {source}")]
    AtTime { t: f64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips any time stamp wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }
}
