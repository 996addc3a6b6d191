//! Exact-arithmetic oracles shared by the integration tests.
//!
//! Everything here works on arbitrary-precision rationals or integers and
//! only touches the library through raw values, so it shares no rounding or
//! saturation code with the implementation under test.

#![allow(dead_code)]

use num::{BigInt, BigRational, One, Signed, Zero};

/// A signed format described only by its bit counts.
#[derive(Debug, Clone, Copy)]
pub struct Fmt {
    pub frac: u32,
    pub total: u32,
}

impl Fmt {
    pub fn lsb(self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << self.frac)
    }

    pub fn min(self) -> BigRational {
        BigRational::from_integer(-(BigInt::one() << (self.total - 1))) * self.lsb()
    }

    pub fn max(self) -> BigRational {
        BigRational::from_integer((BigInt::one() << (self.total - 1)) - 1) * self.lsb()
    }

    pub fn real(self, raw: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(raw)) * self.lsb()
    }

    pub fn wide(self) -> Fmt {
        Fmt {
            frac: 2 * self.frac,
            total: 2 * self.total,
        }
    }

    /// Nearest grid point, ties away from zero, then clamped to the range.
    pub fn quantize(self, v: &BigRational) -> BigRational {
        let scaled = v / self.lsb();
        let rounded = round_half_away(&scaled);
        self.clamp(&(BigRational::from_integer(rounded) * self.lsb()))
    }

    pub fn clamp(self, v: &BigRational) -> BigRational {
        let (lo, hi) = (self.min(), self.max());
        if *v < lo {
            lo
        } else if *v > hi {
            hi
        } else {
            v.clone()
        }
    }

    pub fn to_raw(self, v: &BigRational) -> i64 {
        let scaled = v / self.lsb();
        assert!(scaled.is_integer(), "{v} is not on the grid");
        i64::try_from(scaled.to_integer()).expect("raw fits i64")
    }
}

pub fn round_half_away(v: &BigRational) -> BigInt {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mag = (v.abs() + half).floor().to_integer();
    if v.is_negative() {
        -mag
    } else {
        mag
    }
}

/// Inner product where every product is rounded to the format and every
/// partial sum saturates; the bias is one more term.
pub fn scalar_mac(f: Fmt, w: &[i64], x: &[i64], bias: Option<i64>) -> i64 {
    let mut acc = BigRational::zero();
    for (&a, &b) in w.iter().zip(x) {
        let p = f.quantize(&(f.real(a) * f.real(b)));
        acc = f.clamp(&(acc + p));
    }
    if let Some(b) = bias {
        acc = f.clamp(&(acc + f.real(b)));
    }
    f.to_raw(&acc)
}

/// Inner product with exact products, a saturating wide accumulator, and one
/// final rounding to the format.
pub fn pipelined_mac(f: Fmt, w: &[i64], x: &[i64], bias: Option<i64>) -> i64 {
    let wide = f.wide();
    let mut acc = BigRational::zero();
    for (&a, &b) in w.iter().zip(x) {
        acc = wide.clamp(&(acc + f.real(a) * f.real(b)));
    }
    if let Some(b) = bias {
        acc = wide.clamp(&(acc + f.real(b)));
    }
    f.to_raw(&f.quantize(&acc))
}

/// Hard sigmoid with slope `2^-shift`, written from its piecewise definition.
pub fn hard_sigmoid(f: Fmt, x: &BigRational, shift: u32) -> BigRational {
    let three = BigRational::from_integer(BigInt::from(3));
    if *x < -three.clone() {
        BigRational::zero()
    } else if *x >= three {
        f.clamp(&BigRational::one())
    } else {
        // the shifted value keeps the format's resolution, dropping bits toward minus infinity
        let shifted =
            (x / BigRational::from_integer(BigInt::one() << shift) / f.lsb()).floor() * f.lsb();
        f.clamp(&(shifted + BigRational::new(BigInt::one(), BigInt::from(2))))
    }
}

pub fn hard_tanh(x: &BigRational, lo: &BigRational, hi: &BigRational) -> BigRational {
    if x < lo {
        lo.clone()
    } else if x > hi {
        hi.clone()
    } else {
        x.clone()
    }
}

/// Raw weights of a single-unit, single-input cell: `[w_h, w_x, bias]` per gate.
#[derive(Debug, Clone, Copy)]
pub struct UnitCell {
    pub i: [i64; 3],
    pub f: [i64; 3],
    pub g: [i64; 3],
    pub o: [i64; 3],
}

/// One step of a K=1, M=1 cell in exact arithmetic with the declared
/// rounding points; returns raw `(h, c)`.
pub fn unit_cell_step(
    fm: Fmt,
    cell: &UnitCell,
    x: i64,
    h: i64,
    c: i64,
    pipelined: bool,
    tanh: (i64, i64),
) -> (i64, i64) {
    let (lo, hi) = (fm.real(tanh.0), fm.real(tanh.1));
    let pre = |g: &[i64; 3]| {
        let raw = if pipelined {
            pipelined_mac(fm, &g[..2], &[h, x], Some(g[2]))
        } else {
            scalar_mac(fm, &g[..2], &[h, x], Some(g[2]))
        };
        fm.real(raw)
    };
    let i = hard_sigmoid(fm, &pre(&cell.i), 3);
    let f = hard_sigmoid(fm, &pre(&cell.f), 3);
    let g = hard_tanh(&pre(&cell.g), &lo, &hi);
    let o = hard_sigmoid(fm, &pre(&cell.o), 3);
    let keep = fm.quantize(&(f * fm.real(c)));
    let write = fm.quantize(&(i * g));
    let c_next = fm.clamp(&(keep + write));
    let h_next = fm.quantize(&(o * hard_tanh(&c_next, &lo, &hi)));
    (fm.to_raw(&h_next), fm.to_raw(&c_next))
}

/// Dense output of a K=1, P=1 layer.
pub fn unit_dense(fm: Fmt, w: i64, b: i64, h: i64, pipelined: bool) -> i64 {
    if pipelined {
        pipelined_mac(fm, &[w], &[h], Some(b))
    } else {
        scalar_mac(fm, &[w], &[h], Some(b))
    }
}

fn clamp_int(v: BigInt, total: u32) -> BigInt {
    let hi: BigInt = (BigInt::one() << (total - 1)) - 1;
    let lo: BigInt = -(BigInt::one() << (total - 1));
    v.clamp(lo, hi)
}

/// `v / 2^shift` rounded half away from zero, on integers.
fn div_pow2_round(v: &BigInt, shift: u32) -> BigInt {
    let half = BigInt::one() << (shift - 1);
    let q = (v.abs() + half) >> shift;
    if v.is_negative() {
        -q
    } else {
        q
    }
}

fn to_i64(v: BigInt) -> i64 {
    i64::try_from(v).expect("raw fits i64")
}

/// Integer-only counterpart of [`scalar_mac`].
pub fn scalar_mac_int(f: Fmt, w: &[i64], x: &[i64], bias: Option<i64>) -> i64 {
    let mut acc = BigInt::zero();
    for (&a, &b) in w.iter().zip(x) {
        let p = clamp_int(div_pow2_round(&(BigInt::from(a) * b), f.frac), f.total);
        acc = clamp_int(acc + p, f.total);
    }
    if let Some(b) = bias {
        acc = clamp_int(acc + b, f.total);
    }
    to_i64(acc)
}

/// Integer-only counterpart of [`pipelined_mac`].
pub fn pipelined_mac_int(f: Fmt, w: &[i64], x: &[i64], bias: Option<i64>) -> i64 {
    let wide = f.wide();
    let mut acc = BigInt::zero();
    for (&a, &b) in w.iter().zip(x) {
        acc = clamp_int(acc + BigInt::from(a) * b, wide.total);
    }
    if let Some(b) = bias {
        acc = clamp_int(acc + (BigInt::from(b) << f.frac), wide.total);
    }
    to_i64(clamp_int(div_pow2_round(&acc, f.frac), f.total))
}
