//! Bit-exact MAC engines for fixed-point inner products.
//!
//! * [`EngineKind::ScalarFused`]: each product is widened, immediately rounded
//!   back to the working format and accumulated with saturation. One fused
//!   iteration per clock.
//! * [`EngineKind::Pipelined`]: five stages (init, load, multiply, accumulate,
//!   round). Products stay wide, the wide sum saturates, and rounding happens
//!   once at the end. `N` iterations take `N + 4` clocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{round_shift, FxConfig, FxValue};

/// Fill plus drain overhead of the five-stage pipeline.
pub const PIPELINE_OVERHEAD_CYCLES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    ScalarFused,
    Pipelined,
}

impl EngineKind {
    /// Clock cycles for an inner product of `n` iterations.
    pub fn cycles(self, n: usize) -> u64 {
        match self {
            EngineKind::ScalarFused => n as u64,
            EngineKind::Pipelined => n as u64 + PIPELINE_OVERHEAD_CYCLES,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::ScalarFused => "scalar_fused",
            EngineKind::Pipelined => "pipelined",
        }
    }
}

impl std::str::FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar_fused" | "scalar" => Ok(EngineKind::ScalarFused),
            "pipelined" => Ok(EngineKind::Pipelined),
            other => Err(Error::Config(format!("unknown engine kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacResult {
    pub value: FxValue,
    pub cycles: u64,
}

fn check_operands(w: &[FxValue], x: &[FxValue]) -> Result<FxConfig> {
    if w.len() != x.len() {
        return Err(Error::LengthMismatch {
            what: "MAC operand",
            expected: w.len(),
            actual: x.len(),
        });
    }
    let first = w.first().ok_or(Error::Empty("MAC operands"))?.cfg();
    if let Some(bad) = w.iter().chain(x).find(|v| v.cfg() != first) {
        return Err(Error::FormatMismatch {
            left: first,
            right: bad.cfg(),
        });
    }
    Ok(first)
}

// Raw-level kernels. `bias` is the narrow raw of an extra iteration with multiplicand 1.0.

fn scalar_raw(w: &[FxValue], x: &[FxValue], bias: Option<i64>, cfg: FxConfig) -> i64 {
    let shift = cfg.frac_bits();
    let (lo, hi) = (cfg.min_raw() as i128, cfg.max_raw() as i128);
    let mut sum: i128 = 0;
    for (a, b) in w.iter().zip(x) {
        let product = a.raw() as i128 * b.raw() as i128;
        let narrowed = round_shift(product, shift).clamp(lo, hi);
        sum = (sum + narrowed).clamp(lo, hi);
    }
    if let Some(b) = bias {
        sum = (sum + b as i128).clamp(lo, hi);
    }
    sum as i64
}

fn pipelined_raw(w: &[FxValue], x: &[FxValue], bias: Option<i64>, cfg: FxConfig) -> i64 {
    let wide = cfg.widened();
    let (lo, hi) = (wide.min_raw() as i128, wide.max_raw() as i128);
    let mut sum: i128 = 0;
    for (a, b) in w.iter().zip(x) {
        sum = (sum + a.raw() as i128 * b.raw() as i128).clamp(lo, hi);
    }
    if let Some(b) = bias {
        sum = (sum + ((b as i128) << cfg.frac_bits())).clamp(lo, hi);
    }
    cfg.saturate(round_shift(sum, cfg.frac_bits()))
}

fn run(w: &[FxValue], x: &[FxValue], bias: Option<FxValue>, kind: EngineKind) -> Result<MacResult> {
    let cfg = check_operands(w, x)?;
    if let Some(b) = bias {
        if b.cfg() != cfg {
            return Err(Error::FormatMismatch {
                left: cfg,
                right: b.cfg(),
            });
        }
    }
    let bias_raw = bias.map(FxValue::raw);
    let raw = match kind {
        EngineKind::ScalarFused => scalar_raw(w, x, bias_raw, cfg),
        EngineKind::Pipelined => pipelined_raw(w, x, bias_raw, cfg),
    };
    let iterations = w.len() + usize::from(bias.is_some());
    Ok(MacResult {
        value: FxValue::from_raw(raw, cfg)?,
        cycles: kind.cycles(iterations),
    })
}

/// Inner product with per-iteration rounding.
pub fn mac_scalar(w: &[FxValue], x: &[FxValue]) -> Result<MacResult> {
    run(w, x, None, EngineKind::ScalarFused)
}

/// Inner product with a wide accumulator and a single final rounding.
pub fn mac_pipelined(w: &[FxValue], x: &[FxValue]) -> Result<MacResult> {
    run(w, x, None, EngineKind::Pipelined)
}

pub fn mac(w: &[FxValue], x: &[FxValue], kind: EngineKind) -> Result<MacResult> {
    run(w, x, None, kind)
}

/// `w . x + b`, the bias accumulated as a final iteration with multiplicand 1.0.
pub fn dot_bias(w: &[FxValue], x: &[FxValue], b: FxValue, kind: EngineKind) -> Result<MacResult> {
    run(w, x, Some(b), kind)
}
