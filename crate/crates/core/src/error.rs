use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Location of a single panel cell, used in error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub entity: String,
    pub period: i32,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.entity, self.period)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid panel: {0}")]
    Panel(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unparsable value {value:?} at row {row}, column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("duplicate key {0}")]
    DuplicateKey(String),

    #[error("non-positive value {value} in `{variable}` at {cell}")]
    NonPositive {
        variable: String,
        cell: Cell,
        value: f64,
    },

    #[error("rank deficiency: column `{0}` is linearly dependent on the preceding columns")]
    RankDeficient(String),

    #[error("insufficient degrees of freedom: {0}")]
    DegreesOfFreedom(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("weak-instrument degeneracy: {0}")]
    WeakInstruments(String),

    #[error("under-identified: {0}")]
    UnderIdentified(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("monte carlo aborted: {0}")]
    MonteCarlo(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// True for input/config problems, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Panel(_)
            | Error::Schema(_)
            | Error::Parse { .. }
            | Error::DuplicateKey(_)
            | Error::NonPositive { .. }
            | Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::Csv(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
