// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("zero-norm vector in {0}")]
    ZeroNorm(&'static str),
    #[error("UE at {distance:.3} m from BS {bs}: closer than 0.1 m")]
    Collocated { bs: usize, distance: f64 },
    #[error("not enough calibration points: {got} (need at least {need})")]
    TooFewPoints { got: usize, need: usize },
    #[error("all calibration channels are identical")]
    DegenerateDistances,
    #[error("neighborhood size {k} invalid for {n} points")]
    InvalidNeighborhood { k: usize, n: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, history: alloc::vec::Vec<f64> },
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
