use thiserror::Error;

use crate::solver::Trajectory;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected} values, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("parameter `{name}` = {value} out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("velocity model `{kind}` is not available in dimension {dimension}")]
    KindDimension {
        kind: &'static str,
        dimension: usize,
    },

    #[error("time {time} outside the velocity snapshot span [0, {span}]")]
    OutsideSpan { time: f64, span: f64 },

    #[error("field is not mean-zero: |mean| = {mean:e}, tolerance {tolerance:e}")]
    NotMeanZero { mean: f64, tolerance: f64 },

    #[error("grid with {points} points per axis is too large for this reference (max {max})")]
    TooLarge { points: usize, max: usize },

    #[error("radius {radius} is not resolved by the grid (needs at least {min})")]
    Unresolved { radius: f64, min: f64 },

    #[error("solution blew up at t = {time}: norm {norm:e}")]
    BlowUp {
        time: f64,
        norm: f64,
        trajectory: Box<Trajectory>,
    },

    #[error("horizon mismatch: {0} vs {1}")]
    HorizonMismatch(f64, f64),

    #[error("time {0} has no matching entry")]
    TimeMismatch(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected,
        })
    }
}
