use thiserror::Error;

/// Errors raised while building scenarios, channels and interference systems.
///
/// Infeasibility is not an error: solvers report it through
/// [`crate::solvers::SolveStatus`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("index out of range: cell {cell}, user {user}")]
    IndexOutOfRange { cell: usize, user: usize },

    #[error("flat index {0} out of range")]
    FlatIndexOutOfRange(usize),

    #[error("channel gain must be positive and finite, got {value} for user {user} at base station {bs}")]
    InvalidGain { user: usize, bs: usize, value: f64 },

    #[error("user {user} is {distance} m from base station {bs}, below the minimum of {min} m")]
    DistanceBelowMinimum {
        user: usize,
        bs: usize,
        distance: f64,
        min: f64,
    },

    #[error("negative transmit power {value} for user {user}")]
    NegativePower { user: usize, value: f64 },

    #[error("OMA sub-band pairing needs equal users per cell, got {0:?}")]
    UnequalCellSizes(Vec<usize>),

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
