use std::fmt::Write as _;
use std::path::Path;

use fxlstm::activations::{build_1to1_table, build_step_table};
use fxlstm::format::{
    parse_float_model, parse_quant_model, parse_sequences, to_json, QuantModelFile,
};
use fxlstm::lstm_model::{infer_batch, lstm_layer_trace, QuantModel};
use fxlstm::perf_model::{count_ops_meta, estimate_resources, perf, reference, schedule_cycles};
use fxlstm::quantizer::quantize_model;
use fxlstm::{EngineKind, Exec, FxConfig, FxValue, MetaParams};
use serde::Serialize;

use crate::{read, CliError};

fn data(e: fxlstm::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn config(e: fxlstm::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn json_line<T: Serialize>(v: &T) -> String {
    let mut s = to_json(v);
    s.push('\n');
    s
}

pub fn quantize(model: &Path, meta: MetaParams, out: &Path) -> Result<String, CliError> {
    let fm = parse_float_model(&read(model)?).map_err(data)?;
    let q = quantize_model(&fm, &meta).map_err(data)?;
    let file = QuantModelFile::new(&q.model, q.report);
    std::fs::write(out, json_line(&file))
        .map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    Ok(format!(
        "wrote {}: {} parameters in {}, {} saturated\n",
        out.display(),
        q.report.total,
        meta.fixed_point,
        q.report.saturated
    ))
}

pub struct InferOptions {
    pub engine: Option<EngineKind>,
    pub num_parallel_alus: Option<usize>,
    pub trace: bool,
    pub sequential: bool,
    pub json: bool,
}

#[derive(Serialize)]
struct CycleSummary {
    per_step: Vec<u64>,
    lstm: u64,
    dense: u64,
    total: u64,
}

#[derive(Serialize)]
struct SequenceResult {
    index: usize,
    y: Vec<f64>,
    y_raw: Vec<i64>,
    cycles: CycleSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden_trace: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct InferOutput {
    engine: EngineKind,
    num_parallel_alus: usize,
    fixed_point: FxConfig,
    sequences: usize,
    total_cycles: u64,
    results: Vec<SequenceResult>,
}

fn reals(v: &[FxValue]) -> Vec<f64> {
    v.iter().map(|x| x.to_real()).collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn infer(model: &Path, inputs: &Path, opts: InferOptions) -> Result<String, CliError> {
    let mut q = parse_quant_model(&read(model)?).map_err(data)?;
    if opts.engine.is_some() || opts.num_parallel_alus.is_some() {
        let mut meta = q.meta().clone();
        meta.engine = opts.engine.unwrap_or(meta.engine);
        meta.num_parallel_alus = opts.num_parallel_alus.unwrap_or(meta.num_parallel_alus);
        meta.validate().map_err(config)?;
        q = QuantModel::from_raw(meta, &q.to_raw()).map_err(data)?;
    }
    let seqs = parse_sequences(&read(inputs)?).map_err(data)?;
    let exec = if opts.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let runs = infer_batch(&q, &seqs, exec).map_err(data)?;

    let mut results = Vec::with_capacity(runs.len());
    for (index, (run, seq)) in runs.into_iter().zip(&seqs).enumerate() {
        let hidden_trace = if opts.trace {
            let xs = q.quantize_inputs(seq).map_err(data)?;
            let trace =
                lstm_layer_trace(&xs, q.lstm(), q.activations(), &q.datapath()).map_err(data)?;
            Some(trace.iter().map(|(s, _)| reals(&s.h)).collect())
        } else {
            None
        };
        results.push(SequenceResult {
            index,
            y: run.y_real(),
            y_raw: run.y.iter().map(|v| v.raw()).collect(),
            cycles: CycleSummary {
                per_step: run.cycles.per_step_cycles,
                lstm: run.cycles.lstm_total,
                dense: run.cycles.dense_total,
                total: run.cycles.total,
            },
            hidden_trace,
        });
    }
    let out = InferOutput {
        engine: q.meta().engine,
        num_parallel_alus: q.meta().num_parallel_alus,
        fixed_point: q.cfg(),
        sequences: results.len(),
        total_cycles: results.iter().map(|r| r.cycles.total).sum(),
        results,
    };
    if opts.json {
        return Ok(json_line(&out));
    }

    let m = q.meta();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "model: hidden_size={} input_size={} out_features={} fixed_point={} engine={} num_parallel_alus={}",
        m.hidden_size,
        m.input_size,
        m.out_features,
        out.fixed_point,
        out.engine.name(),
        out.num_parallel_alus
    );
    let _ = writeln!(s, "sequences: {}", out.sequences);
    for r in &out.results {
        let _ = writeln!(
            s,
            "seq {}: y=[{}] raw=[{}] cycles={} (lstm {} + dense {})",
            r.index,
            join(&r.y),
            join(&r.y_raw),
            r.cycles.total,
            r.cycles.lstm,
            r.cycles.dense
        );
        for (t, h) in r.hidden_trace.iter().flatten().enumerate() {
            let _ = writeln!(s, "  step {t}: h=[{}]", join(h));
        }
    }
    let _ = writeln!(s, "total_cycles: {}", out.total_cycles);
    Ok(s)
}

#[derive(Serialize)]
struct Report {
    meta: MetaParams,
    ops_per_inference: u64,
    cycles: CycleSummary,
    perf: fxlstm::perf_model::PerfReport,
    resources: fxlstm::perf_model::ResourceReport,
    fits: bool,
    reference_check: Vec<reference::Check>,
}

fn fmt_check(c: &reference::Check) -> String {
    match c.pass {
        Some(pass) => format!(
            "{:<44} {:>10.4}  expected {:>8.4} +-{:<6} {}",
            c.name,
            c.computed,
            c.expected,
            c.tolerance,
            if pass { "PASS" } else { "FAIL" }
        ),
        None if c.expected.is_nan() => format!("{:<44} {:>10.4}  (info)", c.name, c.computed),
        None => format!(
            "{:<44} {:>10.4}  published {:>8.4} (info)",
            c.name, c.computed, c.expected
        ),
    }
}

pub fn report(meta: &MetaParams, json: bool) -> Result<String, CliError> {
    let ops = count_ops_meta(meta).map_err(config)?;
    let sched =
        schedule_cycles(meta, meta.engine, meta.num_parallel_alus, meta.seq_len).map_err(config)?;
    let p = perf(meta).map_err(config)?;
    let r = estimate_resources(meta).map_err(config)?;
    let checks = reference::checks().map_err(config)?;
    let fits = r.fits();
    if json {
        return Ok(json_line(&Report {
            meta: meta.clone(),
            ops_per_inference: ops,
            cycles: CycleSummary {
                per_step: sched.per_step_cycles,
                lstm: sched.lstm_total,
                dense: sched.dense_total,
                total: sched.total,
            },
            perf: p,
            resources: r,
            fits,
            reference_check: checks,
        }));
    }

    let mut s = String::new();
    let _ = writeln!(s, "[config]");
    let _ = writeln!(
        s,
        "hidden_size={} input_size={} in_features={} out_features={} num_lstm_layers={}",
        meta.hidden_size,
        meta.input_size,
        meta.in_features,
        meta.out_features,
        meta.num_lstm_layers
    );
    let _ = writeln!(
        s,
        "ALU_resource_type={} weight_resource_type={} HardSigmoid_method={} HardTanh_threshold={},{}",
        meta.alu_resource_type,
        meta.weight_resource_type,
        meta.hardsigmoid_method.name(),
        meta.hardtanh_threshold.min_val,
        meta.hardtanh_threshold.max_val
    );
    let _ = writeln!(
        s,
        "fixed_point={} engine={} num_parallel_alus={} seq_len={} clock_hz={} power_w={}",
        meta.fixed_point,
        meta.engine.name(),
        meta.num_parallel_alus,
        meta.seq_len,
        meta.clock_hz,
        meta.power_w
    );
    let _ = writeln!(s, "\n[perf]");
    let _ = writeln!(s, "ops_per_inference      {ops}");
    let _ = writeln!(
        s,
        "cycles                 {} (per step {}, dense {})",
        sched.total,
        sched.per_step_cycles.first().copied().unwrap_or(0),
        sched.dense_total
    );
    let _ = writeln!(s, "latency_us             {:.4}", p.latency_s * 1e6);
    let _ = writeln!(s, "throughput_gops        {:.4}", p.throughput_gops);
    let _ = writeln!(s, "power_w                {}", p.power_w);
    let _ = writeln!(s, "energy_uj              {:.4}", p.energy_uj);
    let _ = writeln!(s, "efficiency_gops_per_w  {:.2}", p.efficiency_gops_per_w);
    let _ = writeln!(s, "\n[resources] device {}", r.device.name);
    let _ = writeln!(
        s,
        "dsp   {:>6} / {:<6} ({:.2}%)",
        r.dsp_used,
        r.device.dsp,
        100.0 * r.dsp_utilisation()
    );
    let _ = writeln!(
        s,
        "lut   {:>6} / {:<6} ({:.2}%)  logic {} multipliers {} ram {}",
        r.lut_used,
        r.device.lut,
        100.0 * r.lut_utilisation(),
        r.lut_logic,
        r.lut_multipliers,
        r.lut_ram
    );
    let _ = writeln!(
        s,
        "bram  {:>6} / {:<6} ({:.2}%)  weight_bits {}",
        r.bram_18k_used,
        r.device.bram_18k,
        100.0 * r.bram_utilisation(),
        r.weight_bits
    );
    let _ = writeln!(s, "fits  {fits}");
    let _ = writeln!(s, "\n[reference-check]");
    for c in &checks {
        let _ = writeln!(s, "{}", fmt_check(c));
    }
    Ok(s)
}

#[derive(Serialize)]
struct TableEntry {
    input_raw: i64,
    input: f64,
    output_raw: i64,
    output: f64,
}

#[derive(Serialize)]
struct Tables {
    fixed_point: FxConfig,
    slope_shift: u32,
    one_to_one_entries: usize,
    step_entries: usize,
    one_to_one: Vec<TableEntry>,
    /// `input_raw` is the inclusive upper breakpoint.
    step: Vec<TableEntry>,
}

pub fn dump_tables(meta: &MetaParams, json: bool) -> Result<String, CliError> {
    let p = meta.hardsigmoid_params().map_err(config)?;
    let cfg = p.cfg();
    let res = cfg.resolution();
    let entry = |&(i, o): &(i64, i64)| TableEntry {
        input_raw: i,
        input: i as f64 * res,
        output_raw: o,
        output: o as f64 * res,
    };
    let one = build_1to1_table(&p).map_err(config)?;
    let step = build_step_table(&p).map_err(config)?;
    let t = Tables {
        fixed_point: cfg,
        slope_shift: p.slope_shift(),
        one_to_one_entries: one.len(),
        step_entries: step.len(),
        one_to_one: one.entries().iter().map(entry).collect(),
        step: step.entries().iter().map(entry).collect(),
    };
    if json {
        return Ok(json_line(&t));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# hard sigmoid tables fixed_point={} slope=2^-{}",
        cfg, t.slope_shift
    );
    let _ = writeln!(s, "# 1to1 entries: {}", t.one_to_one_entries);
    let _ = writeln!(s, "# step entries: {}", t.step_entries);
    let _ = writeln!(s, "[1to1] input_raw input output_raw output");
    for e in &t.one_to_one {
        let _ = writeln!(
            s,
            "{} {} {} {}",
            e.input_raw, e.input, e.output_raw, e.output
        );
    }
    let _ = writeln!(s, "[step] upper_raw upper output_raw output");
    for e in &t.step {
        let _ = writeln!(
            s,
            "{} {} {} {}",
            e.input_raw, e.input, e.output_raw, e.output
        );
    }
    Ok(s)
}
