use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level {0} is outside the open unit interval")]
    LevelOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: expected {expected} fields, found {found}")]
    LengthMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid instrument recipe: {0}")]
    Recipe(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("model expects {expected} parameters, got {found}")]
    ParamLength { expected: usize, found: usize },

    #[error("seasonal period parameter must be non-zero")]
    ZeroPeriod,

    #[error("HAC bandwidth {bandwidth} must be smaller than the sample size {t}")]
    Bandwidth { bandwidth: usize, t: usize },

    #[error(
        "moment covariance is singular (condition number {condition:.3e}); use fewer or less collinear instruments"
    )]
    SingularCovariance { condition: f64 },

    #[error("moment Jacobian is rank deficient; parameters {params:?} are not identified")]
    Unidentified { params: Vec<usize> },

    #[error("optimizer did not converge after {evaluations} evaluations (simplex diameter {diameter:.3e})")]
    NoConvergence { evaluations: usize, diameter: f64 },

    #[error("exactly identified: J-test undefined (df = 0)")]
    ExactlyIdentified,

    #[error("singular matrix in {0}")]
    Singular(&'static str),
}

impl Error {
    /// Errors caused by numerics rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularCovariance { .. }
                | Error::Unidentified { .. }
                | Error::NoConvergence { .. }
                | Error::Singular(_)
        )
    }
}
