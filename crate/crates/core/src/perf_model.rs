//! Operation counting, cycle scheduling, throughput and energy efficiency, and
//! a heuristic DSP/LUT/BRAM estimator for the XC7S15.
//!
//! Op convention: one MAC is two operations, every activation or elementwise
//! operation is one.

use serde::{Deserialize, Serialize};

use crate::activations::HardSigmoidMethod;
use crate::config::{AluResource, MetaParams, WeightResource};
use crate::error::{Error, Result};
use crate::fixed_point::FxConfig;
use crate::mac_engine::EngineKind;

/// Cycle cost of the elementwise phase of one LSTM step, per hidden unit.
///
/// Each unit performs five activations (i, f, g, o, and HardTanh of the cell
/// state), three widened multiplies with narrowing and one add.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElementwiseCosts {
    pub mul_narrow: u64,
    pub add: u64,
    pub activation: u64,
}

impl Default for ElementwiseCosts {
    fn default() -> Self {
        ElementwiseCosts {
            mul_narrow: 1,
            add: 1,
            activation: 1,
        }
    }
}

impl ElementwiseCosts {
    pub const ACTIVATIONS_PER_UNIT: u64 = 5;
    pub const MULS_PER_UNIT: u64 = 3;
    pub const ADDS_PER_UNIT: u64 = 1;

    pub fn per_step(&self, hidden: usize) -> u64 {
        hidden as u64
            * (Self::ACTIVATIONS_PER_UNIT * self.activation
                + Self::MULS_PER_UNIT * self.mul_narrow
                + Self::ADDS_PER_UNIT * self.add)
    }
}

/// Per-phase clock cycles of one inference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleReport {
    pub per_step_cycles: Vec<u64>,
    pub lstm_total: u64,
    pub dense_total: u64,
    pub total: u64,
}

impl CycleReport {
    pub fn new(per_step_cycles: Vec<u64>, dense_total: u64) -> Self {
        let lstm_total = per_step_cycles.iter().sum();
        CycleReport {
            per_step_cycles,
            lstm_total,
            dense_total,
            total: lstm_total + dense_total,
        }
    }
}

/// Round-robin dot products over `alus` ALUs; the phase lasts as long as the busiest ALU.
pub fn dot_phase_cycles(dot_cycles: impl IntoIterator<Item = u64>, alus: usize) -> u64 {
    let alus = alus.max(1);
    let mut busy = vec![0u64; alus];
    for (i, c) in dot_cycles.into_iter().enumerate() {
        busy[i % alus] += c;
    }
    busy.into_iter().max().unwrap_or(0)
}

fn check_dims(hidden: usize, input: usize, output: usize, seq_len: usize) -> Result<()> {
    for (name, v) in [
        ("hidden_size", hidden),
        ("input_size", input),
        ("out_features", output),
        ("seq_len", seq_len),
    ] {
        if v == 0 {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
    }
    Ok(())
}

/// Equivalent operations for one inference over `seq_len` steps.
pub fn count_ops(hidden: usize, input: usize, output: usize, seq_len: usize) -> Result<u64> {
    check_dims(hidden, input, output, seq_len)?;
    let (k, m, p, n) = (hidden as u64, input as u64, output as u64, seq_len as u64);
    let gate_macs = 2 * 4 * k * (k + m + 1);
    let gate_activations = 4 * k;
    let elementwise = 2 * 3 * k + k;
    let dense = 2 * p * (k + 1);
    Ok(n * (gate_macs + gate_activations + elementwise) + dense)
}

pub fn count_ops_meta(meta: &MetaParams) -> Result<u64> {
    count_ops(
        meta.hidden_size,
        meta.input_size,
        meta.out_features,
        meta.seq_len,
    )
}

/// Cycles of one LSTM step.
pub fn step_cycles(
    hidden: usize,
    input: usize,
    kind: EngineKind,
    alus: usize,
    costs: &ElementwiseCosts,
) -> u64 {
    let per_dot = kind.cycles(hidden + input + 1);
    dot_phase_cycles(std::iter::repeat_n(per_dot, 4 * hidden), alus) + costs.per_step(hidden)
}

/// Cycles of the dense layer.
pub fn dense_cycles(hidden: usize, output: usize, kind: EngineKind, alus: usize) -> u64 {
    dot_phase_cycles(std::iter::repeat_n(kind.cycles(hidden + 1), output), alus)
}

/// Analytic schedule for one inference.
pub fn schedule_cycles(
    meta: &MetaParams,
    kind: EngineKind,
    num_parallel_alus: usize,
    seq_len: usize,
) -> Result<CycleReport> {
    check_dims(
        meta.hidden_size,
        meta.input_size,
        meta.out_features,
        seq_len,
    )?;
    if num_parallel_alus == 0 {
        return Err(Error::Config("num_parallel_alus must be at least 1".into()));
    }
    let step = step_cycles(
        meta.hidden_size,
        meta.input_size,
        kind,
        num_parallel_alus,
        &meta.elementwise_costs,
    );
    let dense = dense_cycles(meta.hidden_size, meta.out_features, kind, num_parallel_alus);
    Ok(CycleReport::new(vec![step; seq_len], dense))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub ops_per_inference: f64,
    pub cycles: f64,
    pub clock_hz: f64,
    pub latency_s: f64,
    pub throughput_gops: f64,
    pub power_w: f64,
    pub energy_uj: f64,
    pub efficiency_gops_per_w: f64,
}

impl PerfReport {
    pub fn from_counts(ops: f64, cycles: f64, clock_hz: f64, power_w: f64) -> Result<Self> {
        if !(clock_hz > 0.0 && power_w > 0.0 && cycles > 0.0 && ops >= 0.0) {
            return Err(Error::Config(format!(
                "perf inputs must be positive (ops={ops}, cycles={cycles}, clock_hz={clock_hz}, power_w={power_w})"
            )));
        }
        let latency_s = cycles / clock_hz;
        let throughput_gops = ops / latency_s / 1e9;
        Ok(PerfReport {
            ops_per_inference: ops,
            cycles,
            clock_hz,
            latency_s,
            throughput_gops,
            power_w,
            energy_uj: power_w * latency_s * 1e6,
            efficiency_gops_per_w: throughput_gops / power_w,
        })
    }

    /// Build from a measured latency rather than a cycle count.
    pub fn from_latency(ops: f64, latency_s: f64, clock_hz: f64, power_w: f64) -> Result<Self> {
        Self::from_counts(ops, latency_s * clock_hz, clock_hz, power_w)
    }

    pub fn samples_per_second(&self) -> f64 {
        1.0 / self.latency_s
    }
}

/// Performance of the configured accelerator from the op count and schedule.
pub fn perf(meta: &MetaParams) -> Result<PerfReport> {
    let ops = count_ops_meta(meta)?;
    let cycles = schedule_cycles(meta, meta.engine, meta.num_parallel_alus, meta.seq_len)?;
    PerfReport::from_counts(ops as f64, cycles.total as f64, meta.clock_hz, meta.power_w)
}

/// Device capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DeviceTotals {
    pub name: &'static str,
    pub dsp: u64,
    pub lut: u64,
    pub bram_18k: u64,
}

/// Spartan-7 XC7S15: 20 DSP48E1, 8000 LUTs, 10 x 36 Kb = 20 x 18 Kb BRAM.
pub const XC7S15: DeviceTotals = DeviceTotals {
    name: "XC7S15",
    dsp: 20,
    lut: 8000,
    bram_18k: 20,
};

pub const BRAM_18K_BITS: u64 = 18 * 1024;
/// A LUT6 used as 64x1 distributed RAM.
pub const LUTRAM_BITS_PER_LUT: u64 = 64;
pub const LUTS_PER_MULTIPLIER: u64 = 60;
pub const MULTIPLIERS_PER_LSTM_LAYER: u64 = 7;
pub const MULTIPLIERS_PER_DENSE: u64 = 1;
/// Control, addressing, accumulators and muxing of one LSTM cell (excluding activations).
pub const CELL_BASE_LUTS: u64 = 200;
pub const DENSE_BASE_LUTS: u64 = 60;
pub const HARDTANH_LUTS: u64 = 5;

/// Synthesised LUT counts of the hard sigmoid variants: (frac, total, arithmetic, 1to1, step).
pub const HARDSIGMOID_LUTS: [(u32, u32, u64, u64, u64); 3] =
    [(4, 8, 6, 8, 3), (6, 8, 36, 27, 28), (8, 10, 46, 117, 1793)];

/// LUTs of one hard sigmoid unit. Falls back to a table-storage estimate for
/// formats that were never synthesised.
pub fn hardsigmoid_luts(cfg: FxConfig, method: HardSigmoidMethod) -> u64 {
    let known = HARDSIGMOID_LUTS
        .iter()
        .find(|e| e.0 == cfg.frac_bits() && e.1 == cfg.total_bits());
    if let Some(&(_, _, arith, one, step)) = known {
        return match method {
            HardSigmoidMethod::Arithmetic => arith,
            HardSigmoidMethod::OneToOne => one,
            HardSigmoidMethod::Step => step,
        };
    }
    let b = cfg.total_bits() as u64;
    match method {
        HardSigmoidMethod::Arithmetic => 6 * b,
        _ => (cfg.raw_count() * b).div_ceil(LUTRAM_BITS_PER_LUT),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub dsp_used: u64,
    pub lut_used: u64,
    pub lut_logic: u64,
    pub lut_multipliers: u64,
    pub lut_ram: u64,
    pub bram_18k_used: u64,
    pub weight_bits: u64,
    pub device: DeviceTotals,
}

impl ResourceReport {
    pub fn dsp_utilisation(&self) -> f64 {
        self.dsp_used as f64 / self.device.dsp as f64
    }

    pub fn lut_utilisation(&self) -> f64 {
        self.lut_used as f64 / self.device.lut as f64
    }

    pub fn bram_utilisation(&self) -> f64 {
        self.bram_18k_used as f64 / self.device.bram_18k as f64
    }

    pub fn fits(&self) -> bool {
        self.dsp_used <= self.device.dsp
            && self.lut_used <= self.device.lut
            && self.bram_18k_used <= self.device.bram_18k
    }
}

/// Weight memory sizes in bits: one per LSTM layer (gates W and biases), then the dense layer.
pub fn weight_memories(meta: &MetaParams) -> Vec<u64> {
    let b = meta.fixed_point.total_bits() as u64;
    let (k, m, p) = (
        meta.hidden_size as u64,
        meta.input_size as u64,
        meta.out_features as u64,
    );
    let mut mems = vec![b * 4 * k * (k + m + 1); meta.num_lstm_layers];
    mems.push(b * p * (k + 1));
    mems
}

/// Heuristic resource estimate for `num_lstm_layers` instances of the configured cell plus one dense layer.
pub fn estimate_resources(meta: &MetaParams) -> Result<ResourceReport> {
    meta.validate()?;
    estimate_on(meta, XC7S15)
}

pub fn estimate_on(meta: &MetaParams, device: DeviceTotals) -> Result<ResourceReport> {
    let layers = meta.num_lstm_layers as u64;
    let (dsp_used, lut_multipliers) = match meta.alu_resource_type {
        AluResource::Dsp => (
            layers * MULTIPLIERS_PER_LSTM_LAYER + MULTIPLIERS_PER_DENSE,
            0,
        ),
        AluResource::Lut => (
            0,
            (layers * MULTIPLIERS_PER_LSTM_LAYER + MULTIPLIERS_PER_DENSE) * LUTS_PER_MULTIPLIER,
        ),
    };
    let cell_logic = CELL_BASE_LUTS
        + HARDTANH_LUTS
        + hardsigmoid_luts(meta.fixed_point, meta.hardsigmoid_method);
    let lut_logic = layers * cell_logic + DENSE_BASE_LUTS;

    let mems = weight_memories(meta);
    let weight_bits = mems.iter().sum();
    let blocks = |bits: u64| bits.div_ceil(BRAM_18K_BITS);
    let lutram = |bits: u64| bits.div_ceil(LUTRAM_BITS_PER_LUT);
    let (bram_18k_used, lut_ram) = match meta.weight_resource_type {
        WeightResource::Bram => (mems.iter().map(|&b| blocks(b)).sum(), 0),
        WeightResource::Lutram => (0, mems.iter().map(|&b| lutram(b)).sum()),
        WeightResource::Auto => {
            let mut free = device.bram_18k;
            let mut ram = 0;
            for &bits in &mems {
                let need = blocks(bits);
                if need <= free {
                    free -= need;
                } else {
                    // fill what is left, spill the remainder to distributed RAM
                    ram += lutram(bits - free * BRAM_18K_BITS);
                    free = 0;
                }
            }
            (device.bram_18k - free, ram)
        }
    };

    Ok(ResourceReport {
        dsp_used,
        lut_used: lut_logic + lut_multipliers + lut_ram,
        lut_logic,
        lut_multipliers,
        lut_ram,
        bram_18k_used,
        weight_bits,
        device,
    })
}

/// Published throughput and power figures used to cross-check the model's arithmetic.
pub mod reference {
    use serde::Serialize;

    use super::PerfReport;
    use crate::error::Result;

    #[derive(Debug, Clone, Copy, Serialize)]
    pub struct Column {
        pub label: &'static str,
        pub clock_mhz: f64,
        pub latency_us: f64,
        pub throughput_gops: f64,
        pub improvement: f64,
    }

    /// Clock, latency and throughput of the baseline and the four optimisation options.
    pub const THROUGHPUT_COLUMNS: [Column; 5] = [
        Column {
            label: "baseline",
            clock_mhz: 100.0,
            latency_us: 57.25,
            throughput_gops: 0.363,
            improvement: 1.00,
        },
        Column {
            label: "arithmetic",
            clock_mhz: 104.0,
            latency_us: 55.05,
            throughput_gops: 0.378,
            improvement: 1.04,
        },
        Column {
            label: "1to1",
            clock_mhz: 109.0,
            latency_us: 53.09,
            throughput_gops: 0.399,
            improvement: 1.09,
        },
        Column {
            label: "step",
            clock_mhz: 115.0,
            latency_us: 49.75,
            throughput_gops: 0.417,
            improvement: 1.15,
        },
        Column {
            label: "pipelined+step",
            clock_mhz: 204.0,
            latency_us: 28.07,
            throughput_gops: 0.740,
            improvement: 2.04,
        },
    ];

    #[derive(Debug, Clone, Copy, Serialize)]
    pub struct PowerPoint {
        pub label: &'static str,
        pub clock_mhz: f64,
        pub power_w: f64,
        pub latency_us: f64,
        pub throughput_gops: f64,
        pub energy_uj: f64,
        pub efficiency: f64,
    }

    pub const POWER_POINTS: [PowerPoint; 3] = [
        PowerPoint {
            label: "baseline",
            clock_mhz: 100.0,
            power_w: 0.070,
            latency_us: 53.32,
            throughput_gops: 0.390,
            energy_uj: 3.70,
            efficiency: 5.57,
        },
        PowerPoint {
            label: "DSP ALUs",
            clock_mhz: 204.0,
            power_w: 0.057,
            latency_us: 28.07,
            throughput_gops: 0.740,
            energy_uj: 1.51,
            efficiency: 12.98,
        },
        PowerPoint {
            label: "LUT ALUs",
            clock_mhz: 204.0,
            power_w: 0.063,
            latency_us: 28.07,
            throughput_gops: 0.740,
            energy_uj: 1.67,
            efficiency: 11.75,
        },
    ];

    pub const CYCLE_BAND: (f64, f64) = (5700.0, 5800.0);

    #[derive(Debug, Clone, Serialize)]
    pub struct Check {
        pub name: String,
        pub computed: f64,
        pub expected: f64,
        pub tolerance: f64,
        /// `None` for informational rows that are reported but not judged.
        pub pass: Option<bool>,
    }

    impl Check {
        fn judged(name: String, computed: f64, expected: f64, tolerance: f64) -> Self {
            let pass = Some((computed - expected).abs() <= tolerance);
            Check {
                name,
                computed,
                expected,
                tolerance,
                pass,
            }
        }

        fn band(name: String, computed: f64, (lo, hi): (f64, f64)) -> Self {
            Check {
                name,
                computed,
                expected: (lo + hi) / 2.0,
                tolerance: (hi - lo) / 2.0,
                pass: Some((lo..=hi).contains(&computed)),
            }
        }

        fn info(name: String, computed: f64, expected: f64) -> Self {
            Check {
                name,
                computed,
                expected,
                tolerance: f64::NAN,
                pass: None,
            }
        }
    }

    /// Recompute the published figures' arithmetic identities.
    pub fn checks() -> Result<Vec<Check>> {
        let base = THROUGHPUT_COLUMNS[0];
        let mut out = Vec::new();
        for col in &THROUGHPUT_COLUMNS[1..] {
            out.push(Check::judged(
                format!("throughput improvement {}", col.label),
                col.throughput_gops / base.throughput_gops,
                col.improvement,
                0.01,
            ));
        }
        let best = THROUGHPUT_COLUMNS[4];
        out.push(Check::judged(
            "latency reduction % pipelined+step".into(),
            100.0 * (1.0 - best.latency_us / base.latency_us),
            50.97,
            0.1,
        ));
        for col in &THROUGHPUT_COLUMNS {
            out.push(Check::band(
                format!("cycles per inference {}", col.label),
                col.latency_us * col.clock_mhz,
                CYCLE_BAND,
            ));
        }
        for p in &POWER_POINTS {
            let report = perf_of(p)?;
            out.push(Check::judged(
                format!("energy efficiency GOP/s/W {}", p.label),
                report.efficiency_gops_per_w,
                p.efficiency,
                0.01,
            ));
            out.push(Check::info(
                format!("energy uJ (power x latency) {}", p.label),
                report.energy_uj,
                p.energy_uj,
            ));
        }
        out.push(Check::info(
            "ops per inference (throughput x latency)".into(),
            best.throughput_gops * best.latency_us * 1e3,
            f64::NAN,
        ));
        Ok(out)
    }

    /// A [`PerfReport`] driven by a published operating point.
    pub fn perf_of(p: &PowerPoint) -> Result<PerfReport> {
        let latency_s = p.latency_us * 1e-6;
        let ops = p.throughput_gops * 1e9 * latency_s;
        PerfReport::from_latency(ops, latency_s, p.clock_mhz * 1e6, p.power_w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(k: usize, m: usize, p: usize) -> MetaParams {
        MetaParams {
            hidden_size: k,
            in_features: k,
            input_size: m,
            out_features: p,
            ..MetaParams::default()
        }
    }

    #[test]
    fn op_count_examples() {
        assert_eq!(count_ops(1, 1, 1, 1).unwrap(), 39);
        assert!(count_ops(0, 1, 1, 1).is_err());
        assert!(count_ops(1, 1, 1, 0).is_err());
        // 3740 per step, 42 for the dense layer
        assert_eq!(count_ops(20, 1, 1, 1).unwrap(), 3782);
        assert_eq!(count_ops(20, 1, 1, 6).unwrap(), 22482);
    }

    #[test]
    fn schedule_examples() {
        let m = meta(1, 1, 1);
        let r = schedule_cycles(&m, EngineKind::ScalarFused, 1, 1).unwrap();
        assert_eq!(r.per_step_cycles, vec![4 * 3 + 9]);
        assert_eq!(r.dense_total, 2);
        assert_eq!(r.total, 23);

        let m = meta(20, 1, 1);
        let one = schedule_cycles(&m, EngineKind::Pipelined, 1, 1).unwrap();
        let two = schedule_cycles(&m, EngineKind::Pipelined, 2, 1).unwrap();
        let ew = m.elementwise_costs.per_step(20);
        assert_eq!(one.lstm_total - ew, 2 * (two.lstm_total - ew));
        assert_eq!(two.dense_total, 25);
        assert!(schedule_cycles(&m, EngineKind::Pipelined, 0, 1).is_err());
    }

    #[test]
    fn dot_phase_round_robin() {
        assert_eq!(dot_phase_cycles([24; 20], 1), 480);
        assert_eq!(dot_phase_cycles([20; 20], 1), 400);
        assert_eq!(dot_phase_cycles([5, 5, 5], 2), 10);
        assert_eq!(dot_phase_cycles([], 3), 0);
    }

    #[test]
    fn perf_identities() {
        let r = PerfReport::from_counts(20_000.0, 5_000.0, 200e6, 0.05).unwrap();
        assert_eq!(r.latency_s, 25e-6);
        assert!((r.throughput_gops - 0.8).abs() < 1e-12);
        assert!((r.efficiency_gops_per_w * r.power_w - r.throughput_gops).abs() < 1e-12);
        assert!((r.energy_uj - 1.25).abs() < 1e-12);
        assert!(PerfReport::from_counts(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(PerfReport::from_counts(1.0, 1.0, 1.0, -1.0).is_err());
        perf(&MetaParams::default()).unwrap();
    }

    #[test]
    fn reference_efficiency() {
        let dsp = reference::perf_of(&reference::POWER_POINTS[1]).unwrap();
        assert!((dsp.efficiency_gops_per_w - 12.98).abs() < 0.01);
        let lut = reference::perf_of(&reference::POWER_POINTS[2]).unwrap();
        assert!((lut.efficiency_gops_per_w - 11.75).abs() < 0.01);
        let all = reference::checks().unwrap();
        assert!(all.iter().all(|c| c.pass != Some(false)), "{all:#?}");
    }

    #[test]
    fn resource_anchors() {
        let dsp = estimate_resources(&MetaParams::default()).unwrap();
        assert_eq!(dsp.dsp_used, 8);
        assert_eq!(dsp.dsp_utilisation(), 0.4);
        let lut_meta = MetaParams {
            alu_resource_type: AluResource::Lut,
            ..MetaParams::default()
        };
        let lut = estimate_resources(&lut_meta).unwrap();
        assert_eq!(lut.dsp_used, 0);
        assert_eq!(lut.lut_used - dsp.lut_used, 480);
        assert_eq!(dsp.bram_18k_used, 2);
        assert!(dsp.fits() && lut.fits());
    }

    #[test]
    fn layer_scaling() {
        let stack = |layers, alu| MetaParams {
            num_lstm_layers: layers,
            alu_resource_type: alu,
            ..meta(60, 1, 1)
        };
        assert!(estimate_resources(&stack(5, AluResource::Lut))
            .unwrap()
            .fits());
        assert!(!estimate_resources(&stack(6, AluResource::Lut))
            .unwrap()
            .fits());
        assert!(estimate_resources(&stack(2, AluResource::Dsp))
            .unwrap()
            .fits());
        assert!(!estimate_resources(&stack(3, AluResource::Dsp))
            .unwrap()
            .fits());
    }

    #[test]
    fn storage_modes() {
        let m = |w| MetaParams {
            weight_resource_type: w,
            ..meta(200, 1, 1)
        };
        let bram = estimate_resources(&m(WeightResource::Bram)).unwrap();
        assert_eq!(bram.lut_ram, 0);
        assert!(bram.bram_18k_used > 20 && !bram.fits());
        let lutram = estimate_resources(&m(WeightResource::Lutram)).unwrap();
        assert_eq!(lutram.bram_18k_used, 0);
        let auto = estimate_resources(&m(WeightResource::Auto)).unwrap();
        assert_eq!(auto.bram_18k_used, 20);
        assert!(auto.lut_ram > 0 && auto.lut_ram < lutram.lut_ram);
    }

    #[test]
    fn sigmoid_lut_constants() {
        assert_eq!(hardsigmoid_luts(FxConfig::Q4_8, HardSigmoidMethod::Step), 3);
        let c = FxConfig::new(8, 10).unwrap();
        assert_eq!(hardsigmoid_luts(c, HardSigmoidMethod::Step), 1793);
        let c = FxConfig::new(5, 9).unwrap();
        assert_eq!(hardsigmoid_luts(c, HardSigmoidMethod::OneToOne), 72);
    }
}
