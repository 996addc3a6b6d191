use thiserror::Error;

use crate::fixed_point::FxConfig;

/// Errors raised by the simulator, estimators and file loaders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid fixed-point format ({frac_bits},{total_bits}): {reason}")]
    InvalidFormat {
        frac_bits: u32,
        total_bits: u32,
        reason: &'static str,
    },
    #[error("non-finite value {0} cannot be quantised")]
    NonFinite(f64),
    #[error("raw value {raw} out of range for {cfg}")]
    RawOutOfRange { raw: i64, cfg: FxConfig },
    #[error("fixed-point format mismatch: {left} vs {right}")]
    FormatMismatch { left: FxConfig, right: FxConfig },
    #[error("cannot narrow {from} to {to}: target has more fractional bits")]
    NarrowingWidens { from: FxConfig, to: FxConfig },
    #[error("length mismatch: {what} expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid activation parameters: {0}")]
    Activation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
