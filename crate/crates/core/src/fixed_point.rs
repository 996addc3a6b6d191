//! Signed fixed-point numbers in an `(a, b)` format: `a` fractional bits out
//! of `b` total bits, two's complement.
//!
//! Every format change is explicit. Products widen exactly into `(2a, 2b)`;
//! narrowing rounds half away from zero and saturates. Additions saturate.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widest format a user may configure. Widened intermediates go up to twice this.
pub const MAX_TOTAL_BITS: u32 = 32;

const MAX_WIDE_BITS: u32 = 2 * MAX_TOTAL_BITS;

/// A fixed-point format `(frac_bits, total_bits)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FxConfigRepr", into = "FxConfigRepr")]
pub struct FxConfig {
    frac_bits: u32,
    total_bits: u32,
}

#[derive(Serialize, Deserialize)]
struct FxConfigRepr {
    frac_bits: u32,
    total_bits: u32,
}

impl TryFrom<FxConfigRepr> for FxConfig {
    type Error = Error;

    fn try_from(r: FxConfigRepr) -> Result<Self> {
        FxConfig::new(r.frac_bits, r.total_bits)
    }
}

impl From<FxConfig> for FxConfigRepr {
    fn from(c: FxConfig) -> Self {
        FxConfigRepr {
            frac_bits: c.frac_bits,
            total_bits: c.total_bits,
        }
    }
}

impl FxConfig {
    /// The 8-bit standard format with four fractional bits.
    pub const Q4_8: FxConfig = FxConfig {
        frac_bits: 4,
        total_bits: 8,
    };

    /// Requires `1 <= frac_bits < total_bits <= 32`.
    pub fn new(frac_bits: u32, total_bits: u32) -> Result<Self> {
        Self::checked(frac_bits, total_bits, MAX_TOTAL_BITS)
    }

    fn checked(frac_bits: u32, total_bits: u32, max_bits: u32) -> Result<Self> {
        let reason = if frac_bits < 1 {
            "frac_bits must be at least 1"
        } else if frac_bits >= total_bits {
            "frac_bits must be smaller than total_bits"
        } else if total_bits > max_bits {
            "total_bits exceeds the supported maximum of 32"
        } else {
            return Ok(FxConfig {
                frac_bits,
                total_bits,
            });
        };
        Err(Error::InvalidFormat {
            frac_bits,
            total_bits,
            reason,
        })
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    pub fn total_bits(self) -> u32 {
        self.total_bits
    }

    /// The `(2a, 2b)` format that holds any product of two values in `self` exactly.
    pub fn widened(self) -> FxConfig {
        // frac < total <= 32 so the doubled format is always valid
        FxConfig::checked(2 * self.frac_bits, 2 * self.total_bits, MAX_WIDE_BITS)
            .expect("widened format of a valid format")
    }

    pub fn min_raw(self) -> i64 {
        (-(1i128 << (self.total_bits - 1))) as i64
    }

    pub fn max_raw(self) -> i64 {
        ((1i128 << (self.total_bits - 1)) - 1) as i64
    }

    /// Value of one least significant bit.
    pub fn resolution(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn min_real(self) -> f64 {
        self.min_raw() as f64 * self.resolution()
    }

    pub fn max_real(self) -> f64 {
        self.max_raw() as f64 * self.resolution()
    }

    pub fn contains_raw(self, raw: i64) -> bool {
        (self.min_raw()..=self.max_raw()).contains(&raw)
    }

    /// Clamp an arbitrary integer into the raw range.
    pub fn saturate(self, raw: i128) -> i64 {
        raw.clamp(self.min_raw() as i128, self.max_raw() as i128) as i64
    }

    /// Number of distinct raw values. Only meaningful for user formats (<= 32 bits).
    pub fn raw_count(self) -> u64 {
        1u64 << self.total_bits
    }

    /// Every raw value of the format in increasing order.
    pub fn raws(self) -> impl DoubleEndedIterator<Item = i64> + Clone {
        self.min_raw()..=self.max_raw()
    }

    /// Every value of the format in increasing order.
    pub fn values(self) -> impl DoubleEndedIterator<Item = FxValue> + Clone {
        self.raws().map(move |raw| FxValue { raw, cfg: self })
    }

    /// Quantise a real-valued grid point, rejecting anything off the grid or out of range.
    pub fn exact_raw(self, r: f64) -> Result<i64> {
        let scaled = r * (self.frac_bits as f64).exp2();
        if !scaled.is_finite() {
            return Err(Error::NonFinite(r));
        }
        if scaled.fract() != 0.0 {
            return Err(Error::Config(format!(
                "{r} is not a multiple of the {self} resolution"
            )));
        }
        let raw = scaled as i64;
        if !self.contains_raw(raw) {
            return Err(Error::RawOutOfRange { raw, cfg: self });
        }
        Ok(raw)
    }
}

impl fmt::Display for FxConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.frac_bits, self.total_bits)
    }
}

/// A raw two's complement integer interpreted in a format.
///
/// The raw value is always inside the format's range, so the represented
/// real number is `raw * 2^-frac_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FxValue {
    raw: i64,
    cfg: FxConfig,
}

impl FxValue {
    pub fn from_raw(raw: i64, cfg: FxConfig) -> Result<Self> {
        if cfg.contains_raw(raw) {
            Ok(FxValue { raw, cfg })
        } else {
            Err(Error::RawOutOfRange { raw, cfg })
        }
    }

    /// Clamps `raw` into range instead of failing.
    pub fn saturating_from_raw(raw: i128, cfg: FxConfig) -> Self {
        FxValue {
            raw: cfg.saturate(raw),
            cfg,
        }
    }

    pub fn zero(cfg: FxConfig) -> Self {
        FxValue { raw: 0, cfg }
    }

    /// Quantise a real number: round half away from zero, then saturate.
    pub fn from_real(r: f64, cfg: FxConfig) -> Result<Self> {
        Ok(Self::from_real_reporting(r, cfg)?.0)
    }

    /// As [`FxValue::from_real`], also reporting whether the value hit a rail.
    pub fn from_real_reporting(r: f64, cfg: FxConfig) -> Result<(Self, bool)> {
        if !r.is_finite() {
            return Err(Error::NonFinite(r));
        }
        // f64::round is half away from zero
        let scaled = (r * (cfg.frac_bits as f64).exp2()).round();
        let saturated = scaled < cfg.min_raw() as f64 || scaled > cfg.max_raw() as f64;
        let raw = if saturated {
            if scaled < 0.0 {
                cfg.min_raw()
            } else {
                cfg.max_raw()
            }
        } else {
            scaled as i64
        };
        Ok((FxValue { raw, cfg }, saturated))
    }

    pub fn raw(self) -> i64 {
        self.raw
    }

    pub fn cfg(self) -> FxConfig {
        self.cfg
    }

    pub fn to_real(self) -> f64 {
        self.raw as f64 * self.cfg.resolution()
    }

    fn same_cfg(self, other: FxValue) -> Result<()> {
        if self.cfg == other.cfg {
            Ok(())
        } else {
            Err(Error::FormatMismatch {
                left: self.cfg,
                right: other.cfg,
            })
        }
    }

    /// Saturating addition in the shared format.
    pub fn saturating_add(self, other: FxValue) -> Result<FxValue> {
        self.same_cfg(other)?;
        Ok(FxValue::saturating_from_raw(
            self.raw as i128 + other.raw as i128,
            self.cfg,
        ))
    }

    /// Exact product in the widened `(2a, 2b)` format.
    pub fn widening_mul(self, other: FxValue) -> Result<FxValue> {
        self.same_cfg(other)?;
        Ok(FxValue {
            raw: self.raw * other.raw,
            cfg: self.cfg.widened(),
        })
    }

    /// Round to `target`'s resolution (half away from zero) and saturate into its range.
    pub fn round_to(self, target: FxConfig) -> Result<FxValue> {
        if self.cfg.frac_bits < target.frac_bits {
            return Err(Error::NarrowingWidens {
                from: self.cfg,
                to: target,
            });
        }
        let shift = self.cfg.frac_bits - target.frac_bits;
        Ok(FxValue::saturating_from_raw(
            round_shift(self.raw as i128, shift),
            target,
        ))
    }

    /// Arithmetic right shift: `floor(raw / 2^k)`, format unchanged.
    pub fn shr_floor(self, k: u32) -> FxValue {
        let raw = if k >= 63 {
            if self.raw < 0 {
                -1
            } else {
                0
            }
        } else {
            self.raw >> k
        };
        FxValue { raw, cfg: self.cfg }
    }
}

/// Divide by `2^shift`, rounding half away from zero.
pub(crate) fn round_shift(raw: i128, shift: u32) -> i128 {
    if shift == 0 {
        return raw;
    }
    let half = 1i128 << (shift - 1);
    if raw >= 0 {
        (raw + half) >> shift
    } else {
        -((-raw + half) >> shift)
    }
}

impl PartialOrd for FxValue {
    /// Values are only ordered within a single format.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        (self.cfg == other.cfg).then(|| self.raw.cmp(&other.raw))
    }
}

impl fmt::Display for FxValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_real())
    }
}
