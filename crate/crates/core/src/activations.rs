//! HardTanh and the power-of-two-slope hard sigmoid.
//!
//! The hard sigmoid has three interchangeable implementations: a shift-and-add
//! datapath, a one-entry-per-input lookup table covering the linear region, and
//! a step table where runs of equal output are merged into one breakpoint. All
//! three are bit-identical over the whole input range.
//!
//! Linear region is `lower <= x < upper`; below it the output is 0 and at or
//! above it the output is 1. Bounds that fall outside the format's range are
//! clamped to it, so a narrow format may have no saturation region at all.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{FxConfig, FxValue};

fn check_cfg(x: FxValue, cfg: FxConfig) -> Result<()> {
    if x.cfg() == cfg {
        Ok(())
    } else {
        Err(Error::FormatMismatch {
            left: x.cfg(),
            right: cfg,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardTanhParams {
    min_val: FxValue,
    max_val: FxValue,
}

impl HardTanhParams {
    pub fn new(min_val: FxValue, max_val: FxValue) -> Result<Self> {
        check_cfg(max_val, min_val.cfg())?;
        if min_val.raw() >= max_val.raw() {
            return Err(Error::Activation(format!(
                "HardTanh min_val {min_val} must be below max_val {max_val}"
            )));
        }
        Ok(HardTanhParams { min_val, max_val })
    }

    /// Thresholds given as reals; both must lie exactly on the format's grid.
    pub fn from_reals(cfg: FxConfig, min_val: f64, max_val: f64) -> Result<Self> {
        let lo = FxValue::from_raw(cfg.exact_raw(min_val)?, cfg)?;
        let hi = FxValue::from_raw(cfg.exact_raw(max_val)?, cfg)?;
        Self::new(lo, hi)
    }

    /// Bounds of +-1, saturated to the format when 1.0 is not representable.
    pub fn unit(cfg: FxConfig) -> Self {
        let hi = FxValue::saturating_from_raw(1i128 << cfg.frac_bits(), cfg);
        let lo = FxValue::saturating_from_raw(-(1i128 << cfg.frac_bits()), cfg);
        HardTanhParams {
            min_val: lo,
            max_val: hi,
        }
    }

    pub fn min_val(&self) -> FxValue {
        self.min_val
    }

    pub fn max_val(&self) -> FxValue {
        self.max_val
    }

    pub fn cfg(&self) -> FxConfig {
        self.min_val.cfg()
    }
}

pub fn hardtanh(x: FxValue, p: &HardTanhParams) -> Result<FxValue> {
    check_cfg(x, p.cfg())?;
    let raw = x.raw().clamp(p.min_val.raw(), p.max_val.raw());
    FxValue::from_raw(raw, x.cfg())
}

/// Parameters of the hard sigmoid over one working format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardSigmoidParams {
    cfg: FxConfig,
    slope_shift: u32,
    // raw bounds after clamping: start inclusive, end exclusive
    linear_start: i64,
    linear_end: i64,
    offset: FxValue,
    one: FxValue,
}

impl HardSigmoidParams {
    pub const DEFAULT_SLOPE_SHIFT: u32 = 3;
    pub const DEFAULT_LOWER: f64 = -3.0;
    pub const DEFAULT_UPPER: f64 = 3.0;

    /// `slope = 2^-slope_shift`; `lower` and `upper` must be multiples of the
    /// format resolution but may lie outside its range.
    pub fn new(cfg: FxConfig, slope_shift: u32, lower: f64, upper: f64) -> Result<Self> {
        if slope_shift > cfg.frac_bits() {
            return Err(Error::Activation(format!(
                "slope 2^-{slope_shift} is not representable in {cfg}"
            )));
        }
        let scale = (cfg.frac_bits() as f64).exp2();
        let (lo, hi) = (lower * scale, upper * scale);
        if !lo.is_finite() || !hi.is_finite() || lo.fract() != 0.0 || hi.fract() != 0.0 {
            return Err(Error::Activation(format!(
                "bounds [{lower}, {upper}) are not on the {cfg} grid"
            )));
        }
        if lo >= hi {
            return Err(Error::Activation(format!(
                "lower bound {lower} must be below upper bound {upper}"
            )));
        }
        let linear_start = lo.max(cfg.min_raw() as f64) as i64;
        let linear_end = hi.min(cfg.max_raw() as f64 + 1.0) as i64;
        if linear_start >= linear_end {
            return Err(Error::Activation(format!(
                "linear region [{lower}, {upper}) does not intersect the {cfg} range"
            )));
        }
        Ok(HardSigmoidParams {
            cfg,
            slope_shift,
            linear_start,
            linear_end,
            offset: FxValue::from_raw(1 << (cfg.frac_bits() - 1), cfg)?,
            one: FxValue::saturating_from_raw(1i128 << cfg.frac_bits(), cfg),
        })
    }

    /// Slope 0.125 over `[-3, 3)`. Formats with fewer than three fractional
    /// bits get slope `2^-frac` over `[-2^(frac-1), 2^(frac-1))`, which keeps
    /// the output inside `[0, 1]`.
    pub fn defaults(cfg: FxConfig) -> Self {
        let shift = Self::DEFAULT_SLOPE_SHIFT.min(cfg.frac_bits());
        let (lower, upper) = if shift == Self::DEFAULT_SLOPE_SHIFT {
            (Self::DEFAULT_LOWER, Self::DEFAULT_UPPER)
        } else {
            let half = ((shift as i32) - 1).max(0);
            let b = 2f64.powi(half);
            (-b, b)
        };
        Self::new(cfg, shift, lower, upper)
            .expect("default hard sigmoid parameters are valid for every format")
    }

    pub fn cfg(&self) -> FxConfig {
        self.cfg
    }

    pub fn slope_shift(&self) -> u32 {
        self.slope_shift
    }

    pub fn offset(&self) -> FxValue {
        self.offset
    }

    /// First input of the linear region (clamped).
    pub fn lower_bound(&self) -> FxValue {
        FxValue::saturating_from_raw(self.linear_start as i128, self.cfg)
    }

    /// First input of the upper saturation region, or `None` when the region is empty.
    pub fn upper_bound(&self) -> Option<FxValue> {
        FxValue::from_raw(self.linear_end, self.cfg).ok()
    }

    /// Raw inputs of the linear region.
    pub fn linear_raws(&self) -> std::ops::Range<i64> {
        self.linear_start..self.linear_end
    }

    pub fn zero(&self) -> FxValue {
        FxValue::zero(self.cfg)
    }

    pub fn one(&self) -> FxValue {
        self.one
    }
}

/// Shift-and-add datapath.
pub fn hardsigmoid_arith(x: FxValue, p: &HardSigmoidParams) -> Result<FxValue> {
    check_cfg(x, p.cfg)?;
    Ok(if x.raw() < p.linear_start {
        p.zero()
    } else if x.raw() >= p.linear_end {
        p.one
    } else {
        x.shr_floor(p.slope_shift).saturating_add(p.offset)?
    })
}

/// One entry per raw input of the linear region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationTable {
    cfg: FxConfig,
    entries: Vec<(i64, i64)>,
    below: i64,
    above: i64,
}

impl ActivationTable {
    pub fn cfg(&self) -> FxConfig {
        self.cfg
    }

    /// `(input_raw, output_raw)` pairs in increasing input order.
    pub fn entries(&self) -> &[(i64, i64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, x: FxValue) -> Result<FxValue> {
        check_cfg(x, self.cfg)?;
        let raw = match self.entries.binary_search_by_key(&x.raw(), |&(i, _)| i) {
            Ok(idx) => self.entries[idx].1,
            Err(0) => self.below,
            Err(_) => self.above,
        };
        FxValue::from_raw(raw, self.cfg)
    }
}

pub fn build_1to1_table(p: &HardSigmoidParams) -> Result<ActivationTable> {
    let entries = p
        .linear_raws()
        .map(|raw| {
            let x = FxValue::from_raw(raw, p.cfg)?;
            Ok((raw, hardsigmoid_arith(x, p)?.raw()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ActivationTable {
        cfg: p.cfg,
        entries,
        below: p.zero().raw(),
        above: p.one.raw(),
    })
}

/// Breakpoints `(upper_input_raw_inclusive, output_raw)`; the last breakpoint
/// is always the format's maximum raw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTable {
    cfg: FxConfig,
    entries: Vec<(i64, i64)>,
}

impl StepTable {
    pub fn cfg(&self) -> FxConfig {
        self.cfg
    }

    pub fn entries(&self) -> &[(i64, i64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, x: FxValue) -> Result<FxValue> {
        check_cfg(x, self.cfg)?;
        let idx = self.entries.partition_point(|&(upper, _)| upper < x.raw());
        FxValue::from_raw(self.entries[idx].1, self.cfg)
    }
}

pub fn build_step_table(p: &HardSigmoidParams) -> Result<StepTable> {
    let table = build_1to1_table(p)?;
    let cfg = p.cfg;
    let mut segments = Vec::with_capacity(table.len() + 2);
    if p.linear_start > cfg.min_raw() {
        segments.push((p.linear_start - 1, table.below));
    }
    segments.extend_from_slice(table.entries());
    if p.linear_end <= cfg.max_raw() {
        segments.push((cfg.max_raw(), table.above));
    }

    let mut entries: Vec<(i64, i64)> = Vec::new();
    for (upper, out) in segments {
        match entries.last_mut() {
            Some(last) if last.1 == out => last.0 = upper,
            _ => entries.push((upper, out)),
        }
    }
    if entries.windows(2).any(|w| w[0].1 > w[1].1) {
        return Err(Error::Activation(
            "hard sigmoid is not monotone for these parameters".into(),
        ));
    }
    Ok(StepTable { cfg, entries })
}

/// Which hard sigmoid implementation the accelerator instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HardSigmoidMethod {
    #[serde(rename = "arithmetic")]
    Arithmetic,
    #[serde(rename = "1to1")]
    OneToOne,
    #[serde(rename = "step")]
    Step,
}

impl HardSigmoidMethod {
    pub const ALL: [HardSigmoidMethod; 3] = [
        HardSigmoidMethod::Arithmetic,
        HardSigmoidMethod::OneToOne,
        HardSigmoidMethod::Step,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HardSigmoidMethod::Arithmetic => "arithmetic",
            HardSigmoidMethod::OneToOne => "1to1",
            HardSigmoidMethod::Step => "step",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum SigmoidImpl {
    Arithmetic,
    OneToOne(ActivationTable),
    Step(StepTable),
}

/// A hard sigmoid instance with its lookup table (if any) prebuilt.
#[derive(Debug, Clone, PartialEq)]
pub struct HardSigmoid {
    params: HardSigmoidParams,
    imp: SigmoidImpl,
}

impl HardSigmoid {
    pub fn new(params: HardSigmoidParams, method: HardSigmoidMethod) -> Result<Self> {
        let imp = match method {
            HardSigmoidMethod::Arithmetic => SigmoidImpl::Arithmetic,
            HardSigmoidMethod::OneToOne => SigmoidImpl::OneToOne(build_1to1_table(&params)?),
            HardSigmoidMethod::Step => SigmoidImpl::Step(build_step_table(&params)?),
        };
        Ok(HardSigmoid { params, imp })
    }

    pub fn params(&self) -> &HardSigmoidParams {
        &self.params
    }

    pub fn method(&self) -> HardSigmoidMethod {
        match self.imp {
            SigmoidImpl::Arithmetic => HardSigmoidMethod::Arithmetic,
            SigmoidImpl::OneToOne(_) => HardSigmoidMethod::OneToOne,
            SigmoidImpl::Step(_) => HardSigmoidMethod::Step,
        }
    }

    pub fn eval(&self, x: FxValue) -> Result<FxValue> {
        match &self.imp {
            SigmoidImpl::Arithmetic => hardsigmoid_arith(x, &self.params),
            SigmoidImpl::OneToOne(t) => t.lookup(x),
            SigmoidImpl::Step(t) => t.lookup(x),
        }
    }
}

/// Real-valued counterparts used by the floating-point reference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealActivations {
    pub tanh_min: f64,
    pub tanh_max: f64,
    pub sigmoid_slope: f64,
    pub sigmoid_lower: f64,
    pub sigmoid_upper: f64,
}

impl RealActivations {
    pub fn hardtanh(&self, x: f64) -> f64 {
        x.clamp(self.tanh_min, self.tanh_max)
    }

    pub fn hardsigmoid(&self, x: f64) -> f64 {
        if x < self.sigmoid_lower {
            0.0
        } else if x >= self.sigmoid_upper {
            1.0
        } else {
            x * self.sigmoid_slope + 0.5
        }
    }
}

impl Default for RealActivations {
    fn default() -> Self {
        RealActivations {
            tanh_min: -1.0,
            tanh_max: 1.0,
            sigmoid_slope: 0.125,
            sigmoid_lower: HardSigmoidParams::DEFAULT_LOWER,
            sigmoid_upper: HardSigmoidParams::DEFAULT_UPPER,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q: FxConfig = FxConfig::Q4_8;

    fn r(x: f64) -> FxValue {
        FxValue::from_real(x, Q).unwrap()
    }

    #[test]
    fn hardtanh_examples() {
        let p = HardTanhParams::from_reals(Q, -1.0, 1.0).unwrap();
        assert_eq!(hardtanh(r(0.5), &p).unwrap().to_real(), 0.5);
        assert_eq!(hardtanh(r(7.9375), &p).unwrap().to_real(), 1.0);
        assert_eq!(hardtanh(r(-2.0), &p).unwrap().to_real(), -1.0);
        assert_eq!(p, HardTanhParams::unit(Q));
    }

    #[test]
    fn hardtanh_identity_band() {
        let p = HardTanhParams::unit(Q);
        let identity: Vec<i64> = Q
            .values()
            .filter(|&x| hardtanh(x, &p).unwrap() == x)
            .map(FxValue::raw)
            .collect();
        assert_eq!(identity, (-16..=16).collect::<Vec<_>>());
    }

    #[test]
    fn hardtanh_rejects_bad_bounds() {
        assert!(HardTanhParams::from_reals(Q, 1.0, -1.0).is_err());
        assert!(HardTanhParams::from_reals(Q, 0.5, 0.5).is_err());
        assert!(HardTanhParams::from_reals(Q, -1.01, 1.0).is_err());
    }

    #[test]
    fn arith_examples() {
        let p = HardSigmoidParams::defaults(Q);
        let f = |x: f64| hardsigmoid_arith(r(x), &p).unwrap();
        assert_eq!(f(0.0).to_real(), 0.5);
        assert_eq!(f(3.0).to_real(), 1.0);
        assert_eq!(f(-3.0).raw(), 2);
        assert_eq!(f(-3.0625).raw(), 0);
        assert_eq!(f(2.9375).raw(), 13);
        assert_eq!(f(2.9375).to_real(), 0.8125);
        assert_eq!(f(1.0).to_real(), 0.625);
    }

    #[test]
    fn table_sizes_for_q4_8() {
        let p = HardSigmoidParams::defaults(Q);
        let t = build_1to1_table(&p).unwrap();
        assert_eq!(t.len(), 96);
        assert_eq!(t.entries()[0], (-48, 2));
        assert_eq!(t.entries()[95], (47, 13));
        let s = build_step_table(&p).unwrap();
        assert_eq!(s.len(), 14);
        assert_eq!(s.entries()[0], (-49, 0));
        assert_eq!(s.entries()[13], (127, 16));
        let outs: Vec<i64> = s.entries()[1..13].iter().map(|e| e.1).collect();
        assert_eq!(outs, (2..=13).collect::<Vec<_>>());
    }

    #[test]
    fn narrow_format_has_no_saturation_regions() {
        let cfg = FxConfig::new(6, 8).unwrap();
        let p = HardSigmoidParams::defaults(cfg);
        assert_eq!(p.lower_bound().raw(), -128);
        assert_eq!(p.upper_bound(), None);
        let t = build_1to1_table(&p).unwrap();
        assert_eq!(t.len(), 256);
        let s = build_step_table(&p).unwrap();
        // floor(r/8) + 32 over r in -128..=127 takes the values 16..=47
        assert_eq!(s.len(), 32);
        assert_eq!(s.entries()[0], (-121, 16));
    }

    #[test]
    fn lookup_examples() {
        let p = HardSigmoidParams::defaults(Q);
        for method in HardSigmoidMethod::ALL {
            let h = HardSigmoid::new(p, method).unwrap();
            assert_eq!(h.method(), method);
            assert_eq!(h.eval(r(-8.0)).unwrap().to_real(), 0.0);
            assert_eq!(h.eval(r(7.9375)).unwrap().to_real(), 1.0);
            assert_eq!(h.eval(r(1.0)).unwrap().raw(), 10);
            assert_eq!(h.eval(r(0.0)).unwrap().to_real(), 0.5);
        }
    }

    #[test]
    fn three_methods_agree_exhaustively() {
        for cfg in [(4, 8), (6, 8), (8, 10), (2, 6), (1, 4), (3, 12)] {
            let cfg = FxConfig::new(cfg.0, cfg.1).unwrap();
            let p = HardSigmoidParams::defaults(cfg);
            let one = build_1to1_table(&p).unwrap();
            let step = build_step_table(&p).unwrap();
            let mut prev = i64::MIN;
            for x in cfg.values() {
                let a = hardsigmoid_arith(x, &p).unwrap();
                assert_eq!(a, one.lookup(x).unwrap(), "{cfg} x={x}");
                assert_eq!(a, step.lookup(x).unwrap(), "{cfg} x={x}");
                assert!(a.raw() >= prev);
                assert!(a.raw() >= 0 && a.raw() <= p.one().raw());
                prev = a.raw();
            }
        }
    }

    #[test]
    fn rejects_bad_sigmoid_params() {
        assert!(HardSigmoidParams::new(Q, 5, -3.0, 3.0).is_err());
        assert!(HardSigmoidParams::new(Q, 3, -3.01, 3.0).is_err());
        assert!(HardSigmoidParams::new(Q, 3, 3.0, -3.0).is_err());
        assert!(HardSigmoidParams::new(Q, 3, 20.0, 30.0).is_err());
    }

    #[test]
    fn mismatched_format_rejected() {
        let p = HardSigmoidParams::defaults(Q);
        let x = FxValue::zero(FxConfig::new(6, 8).unwrap());
        assert!(hardsigmoid_arith(x, &p).is_err());
        assert!(build_step_table(&p).unwrap().lookup(x).is_err());
    }

    #[test]
    fn real_activations() {
        let a = RealActivations::default();
        assert_eq!(a.hardsigmoid(0.0), 0.5);
        assert_eq!(a.hardsigmoid(-3.0), 0.125);
        assert_eq!(a.hardsigmoid(-3.5), 0.0);
        assert_eq!(a.hardsigmoid(3.0), 1.0);
        assert_eq!(a.hardtanh(2.0), 1.0);
    }
}
