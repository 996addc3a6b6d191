//! Bit-exact quantised LSTM cell, sequence unrolling and the dense output layer,
//! plus a real-valued reference with the same hard activations.
//!
//! Gates read the concatenation `[h_{t-1}, x_t]`:
//!
//! ```text
//! i = hsig(W_i [h, x] + b_i)    f = hsig(W_f [h, x] + b_f)
//! g = htanh(W_g [h, x] + b_g)   o = hsig(W_o [h, x] + b_o)
//! C' = f*C + i*g                h' = o * htanh(C')
//! ```
//!
//! Elementwise products are widened, rounded back to the working format and
//! summed with saturation, the same regime as one scalar MAC iteration.

use serde::{Deserialize, Serialize};

use crate::activations::{hardtanh, RealActivations};
use crate::config::{Activations, MetaParams};
use crate::error::{Error, Result};
use crate::fixed_point::{FxConfig, FxValue};
use crate::mac_engine::{dot_bias, EngineKind};
use crate::par::{self, Exec};
use crate::perf_model::{dot_phase_cycles, CycleReport, ElementwiseCosts};

/// Row-major matrix of values in one format.
#[derive(Debug, Clone, PartialEq)]
pub struct FxMatrix {
    rows: usize,
    cols: usize,
    data: Vec<FxValue>,
}

impl FxMatrix {
    pub fn zeros(rows: usize, cols: usize, cfg: FxConfig) -> Self {
        FxMatrix {
            rows,
            cols,
            data: vec![FxValue::zero(cfg); rows * cols],
        }
    }

    pub fn from_raw_rows(rows: &[Vec<i64>], cfg: FxConfig) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::LengthMismatch {
                    what: "matrix row",
                    expected: cols,
                    actual: row.len(),
                });
            }
            for &raw in row {
                data.push(FxValue::from_raw(raw, cfg)?);
            }
        }
        Ok(FxMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn to_raw_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.raw()).collect())
            .collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[FxValue] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn set(&mut self, r: usize, c: usize, v: FxValue) {
        self.data[r * self.cols + c] = v;
    }

    pub fn get(&self, r: usize, c: usize) -> FxValue {
        self.data[r * self.cols + c]
    }

    fn values(&self) -> &[FxValue] {
        &self.data
    }
}

fn raw_vec(raws: &[i64], cfg: FxConfig) -> Result<Vec<FxValue>> {
    raws.iter().map(|&r| FxValue::from_raw(r, cfg)).collect()
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            actual,
        })
    }
}

/// Plain nested-array tensors of an LSTM layer, used for files and the float reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmTensors<T> {
    pub w_i: Vec<Vec<T>>,
    pub w_f: Vec<Vec<T>>,
    pub w_g: Vec<Vec<T>>,
    pub w_o: Vec<Vec<T>>,
    pub b_i: Vec<T>,
    pub b_f: Vec<T>,
    pub b_g: Vec<T>,
    pub b_o: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseTensors<T> {
    pub w: Vec<Vec<T>>,
    pub b: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTensors<T> {
    pub lstm: LstmTensors<T>,
    pub dense: DenseTensors<T>,
}

impl<T> LstmTensors<T> {
    pub fn gates(&self) -> [(&Vec<Vec<T>>, &Vec<T>); 4] {
        [
            (&self.w_i, &self.b_i),
            (&self.w_f, &self.b_f),
            (&self.w_g, &self.b_g),
            (&self.w_o, &self.b_o),
        ]
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> LstmTensors<U> {
        let m = |w: &Vec<Vec<T>>| w.iter().map(|r| r.iter().map(&f).collect()).collect();
        let v = |b: &Vec<T>| b.iter().map(&f).collect();
        LstmTensors {
            w_i: m(&self.w_i),
            w_f: m(&self.w_f),
            w_g: m(&self.w_g),
            w_o: m(&self.w_o),
            b_i: v(&self.b_i),
            b_f: v(&self.b_f),
            b_g: v(&self.b_g),
            b_o: v(&self.b_o),
        }
    }
}

impl<T> DenseTensors<T> {
    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> DenseTensors<U> {
        DenseTensors {
            w: self.w.iter().map(|r| r.iter().map(&f).collect()).collect(),
            b: self.b.iter().map(&f).collect(),
        }
    }
}

impl<T: Clone> ModelTensors<T> {
    /// Every tensor filled with `fill`.
    pub fn filled(hidden: usize, input: usize, output: usize, fill: T) -> Self {
        let gate = vec![vec![fill.clone(); hidden + input]; hidden];
        let bias = vec![fill.clone(); hidden];
        ModelTensors {
            lstm: LstmTensors {
                w_i: gate.clone(),
                w_f: gate.clone(),
                w_g: gate.clone(),
                w_o: gate,
                b_i: bias.clone(),
                b_f: bias.clone(),
                b_g: bias.clone(),
                b_o: bias,
            },
            dense: DenseTensors {
                w: vec![vec![fill.clone(); hidden]; output],
                b: vec![fill; output],
            },
        }
    }
}

impl<T> ModelTensors<T> {
    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> ModelTensors<U> {
        ModelTensors {
            lstm: self.lstm.map(&f),
            dense: self.dense.map(&f),
        }
    }

    /// Check every tensor against hidden size K, input size M and output size P.
    pub fn check_shapes(&self, hidden: usize, input: usize, output: usize) -> Result<()> {
        for (w, b) in self.lstm.gates() {
            check_len("gate weight rows", hidden, w.len())?;
            for row in w {
                check_len("gate weight columns", hidden + input, row.len())?;
            }
            check_len("gate bias", hidden, b.len())?;
        }
        check_len("dense weight rows", output, self.dense.w.len())?;
        for row in &self.dense.w {
            check_len("dense weight columns", hidden, row.len())?;
        }
        check_len("dense bias", output, self.dense.b.len())
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let l = &self.lstm;
        [&l.w_i, &l.w_f, &l.w_g, &l.w_o, &self.dense.w]
            .into_iter()
            .flat_map(|m| m.iter().flatten())
            .chain(
                [&l.b_i, &l.b_f, &l.b_g, &l.b_o, &self.dense.b]
                    .into_iter()
                    .flatten(),
            )
    }
}

/// Quantised gate weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub w_i: FxMatrix,
    pub w_f: FxMatrix,
    pub w_g: FxMatrix,
    pub w_o: FxMatrix,
    pub b_i: Vec<FxValue>,
    pub b_f: Vec<FxValue>,
    pub b_g: Vec<FxValue>,
    pub b_o: Vec<FxValue>,
}

impl LstmWeights {
    pub fn zeros(hidden: usize, input: usize, cfg: FxConfig) -> Self {
        let w = FxMatrix::zeros(hidden, hidden + input, cfg);
        let b = vec![FxValue::zero(cfg); hidden];
        LstmWeights {
            w_i: w.clone(),
            w_f: w.clone(),
            w_g: w.clone(),
            w_o: w,
            b_i: b.clone(),
            b_f: b.clone(),
            b_g: b.clone(),
            b_o: b,
        }
    }

    pub fn from_raw(t: &LstmTensors<i64>, cfg: FxConfig) -> Result<Self> {
        let w = LstmWeights {
            w_i: FxMatrix::from_raw_rows(&t.w_i, cfg)?,
            w_f: FxMatrix::from_raw_rows(&t.w_f, cfg)?,
            w_g: FxMatrix::from_raw_rows(&t.w_g, cfg)?,
            w_o: FxMatrix::from_raw_rows(&t.w_o, cfg)?,
            b_i: raw_vec(&t.b_i, cfg)?,
            b_f: raw_vec(&t.b_f, cfg)?,
            b_g: raw_vec(&t.b_g, cfg)?,
            b_o: raw_vec(&t.b_o, cfg)?,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn to_raw(&self) -> LstmTensors<i64> {
        let v = |b: &[FxValue]| b.iter().map(|x| x.raw()).collect();
        LstmTensors {
            w_i: self.w_i.to_raw_rows(),
            w_f: self.w_f.to_raw_rows(),
            w_g: self.w_g.to_raw_rows(),
            w_o: self.w_o.to_raw_rows(),
            b_i: v(&self.b_i),
            b_f: v(&self.b_f),
            b_g: v(&self.b_g),
            b_o: v(&self.b_o),
        }
    }

    /// Gates in the order i, f, g, o.
    pub fn gates(&self) -> [(&FxMatrix, &[FxValue]); 4] {
        [
            (&self.w_i, &self.b_i),
            (&self.w_f, &self.b_f),
            (&self.w_g, &self.b_g),
            (&self.w_o, &self.b_o),
        ]
    }

    pub fn hidden_size(&self) -> usize {
        self.b_i.len()
    }

    pub fn input_size(&self) -> usize {
        self.w_i.cols().saturating_sub(self.hidden_size())
    }

    pub fn cfg(&self) -> Option<FxConfig> {
        self.b_i.first().map(|v| v.cfg())
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.hidden_size();
        if k == 0 {
            return Err(Error::Empty("LSTM hidden state"));
        }
        let cols = self.w_i.cols();
        if cols <= k {
            return Err(Error::Config(format!(
                "gate matrices have {cols} columns; need hidden_size {k} plus at least one input"
            )));
        }
        let cfg = self.cfg().expect("k > 0");
        for (w, b) in self.gates() {
            check_len("gate weight rows", k, w.rows())?;
            check_len("gate weight columns", cols, w.cols())?;
            check_len("gate bias", k, b.len())?;
            if let Some(bad) = w.values().iter().chain(b).find(|v| v.cfg() != cfg) {
                return Err(Error::FormatMismatch {
                    left: cfg,
                    right: bad.cfg(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    pub w: FxMatrix,
    pub b: Vec<FxValue>,
}

impl DenseWeights {
    pub fn zeros(hidden: usize, output: usize, cfg: FxConfig) -> Self {
        DenseWeights {
            w: FxMatrix::zeros(output, hidden, cfg),
            b: vec![FxValue::zero(cfg); output],
        }
    }

    pub fn from_raw(t: &DenseTensors<i64>, cfg: FxConfig) -> Result<Self> {
        let d = DenseWeights {
            w: FxMatrix::from_raw_rows(&t.w, cfg)?,
            b: raw_vec(&t.b, cfg)?,
        };
        check_len("dense weight rows", d.b.len(), d.w.rows())?;
        Ok(d)
    }

    pub fn to_raw(&self) -> DenseTensors<i64> {
        DenseTensors {
            w: self.w.to_raw_rows(),
            b: self.b.iter().map(|v| v.raw()).collect(),
        }
    }

    pub fn out_features(&self) -> usize {
        self.b.len()
    }
}

/// Hidden and cell state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmState {
    pub h: Vec<FxValue>,
    pub c: Vec<FxValue>,
}

impl LstmState {
    pub fn zeros(hidden: usize, cfg: FxConfig) -> Self {
        LstmState {
            h: vec![FxValue::zero(cfg); hidden],
            c: vec![FxValue::zero(cfg); hidden],
        }
    }
}

/// How MACs are executed and costed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Datapath {
    pub kind: EngineKind,
    pub alus: usize,
    pub costs: ElementwiseCosts,
}

impl Datapath {
    pub fn new(kind: EngineKind) -> Self {
        Datapath {
            kind,
            alus: 1,
            costs: ElementwiseCosts::default(),
        }
    }

    pub fn from_meta(meta: &MetaParams) -> Self {
        Datapath {
            kind: meta.engine,
            alus: meta.num_parallel_alus,
            costs: meta.elementwise_costs,
        }
    }
}

/// Post-activation gate values of one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gates {
    pub i: Vec<FxValue>,
    pub f: Vec<FxValue>,
    pub g: Vec<FxValue>,
    pub o: Vec<FxValue>,
}

fn mul_narrow(a: FxValue, b: FxValue) -> Result<FxValue> {
    a.widening_mul(b)?.round_to(a.cfg())
}

/// One cell step, also returning the activated gates.
pub fn lstm_cell_step_detailed(
    x_t: &[FxValue],
    s: &LstmState,
    w: &LstmWeights,
    act: &Activations,
    dp: &Datapath,
) -> Result<(LstmState, Gates, u64)> {
    let k = w.hidden_size();
    check_len("input vector", w.input_size(), x_t.len())?;
    check_len("hidden state", k, s.h.len())?;
    check_len("cell state", k, s.c.len())?;

    let concat: Vec<FxValue> = s.h.iter().chain(x_t).copied().collect();
    let mut dot_cycles = Vec::with_capacity(4 * k);
    let mut pre = Vec::with_capacity(4);
    for (m, b) in w.gates() {
        let mut gate = Vec::with_capacity(k);
        for (r, &bias) in b.iter().enumerate() {
            let res = dot_bias(m.row(r), &concat, bias, dp.kind)?;
            dot_cycles.push(res.cycles);
            gate.push(res.value);
        }
        pre.push(gate);
    }
    let sig = |v: &Vec<FxValue>| -> Result<Vec<FxValue>> {
        v.iter().map(|&x| act.sigmoid.eval(x)).collect()
    };
    let gates = Gates {
        i: sig(&pre[0])?,
        f: sig(&pre[1])?,
        g: pre[2]
            .iter()
            .map(|&x| hardtanh(x, &act.tanh))
            .collect::<Result<_>>()?,
        o: sig(&pre[3])?,
    };

    let mut next = LstmState {
        h: Vec::with_capacity(k),
        c: Vec::with_capacity(k),
    };
    for u in 0..k {
        let keep = mul_narrow(gates.f[u], s.c[u])?;
        let write = mul_narrow(gates.i[u], gates.g[u])?;
        let c = keep.saturating_add(write)?;
        let h = mul_narrow(gates.o[u], hardtanh(c, &act.tanh)?)?;
        next.c.push(c);
        next.h.push(h);
    }
    let cycles = dot_phase_cycles(dot_cycles, dp.alus) + dp.costs.per_step(k);
    Ok((next, gates, cycles))
}

pub fn lstm_cell_step(
    x_t: &[FxValue],
    s: &LstmState,
    w: &LstmWeights,
    act: &Activations,
    dp: &Datapath,
) -> Result<(LstmState, u64)> {
    let (next, _, cycles) = lstm_cell_step_detailed(x_t, s, w, act, dp)?;
    Ok((next, cycles))
}

/// Every intermediate state and its step cost, starting from the zero state.
pub fn lstm_layer_trace(
    seq: &[Vec<FxValue>],
    w: &LstmWeights,
    act: &Activations,
    dp: &Datapath,
) -> Result<Vec<(LstmState, u64)>> {
    if seq.is_empty() {
        return Err(Error::Empty("input sequence"));
    }
    let cfg = w.cfg().ok_or(Error::Empty("LSTM hidden state"))?;
    let mut state = LstmState::zeros(w.hidden_size(), cfg);
    let mut out = Vec::with_capacity(seq.len());
    for x_t in seq {
        let (next, cycles) = lstm_cell_step(x_t, &state, w, act, dp)?;
        out.push((next.clone(), cycles));
        state = next;
    }
    Ok(out)
}

/// Final hidden state and total cycles.
pub fn lstm_layer_forward(
    seq: &[Vec<FxValue>],
    w: &LstmWeights,
    act: &Activations,
    dp: &Datapath,
) -> Result<(Vec<FxValue>, u64)> {
    let trace = lstm_layer_trace(seq, w, act, dp)?;
    let cycles = trace.iter().map(|(_, c)| c).sum();
    let (last, _) = trace.into_iter().last().expect("non-empty sequence");
    Ok((last.h, cycles))
}

/// Dense layer without activation.
pub fn dense_forward(
    h: &[FxValue],
    d: &DenseWeights,
    dp: &Datapath,
) -> Result<(Vec<FxValue>, u64)> {
    check_len("dense input", d.w.cols(), h.len())?;
    let mut y = Vec::with_capacity(d.out_features());
    let mut cycles = Vec::with_capacity(d.out_features());
    for (p, &b) in d.b.iter().enumerate() {
        let r = dot_bias(d.w.row(p), h, b, dp.kind)?;
        y.push(r.value);
        cycles.push(r.cycles);
    }
    Ok((y, dot_phase_cycles(cycles, dp.alus)))
}

/// A complete quantised model: one LSTM layer and a dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantModel {
    meta: MetaParams,
    lstm: LstmWeights,
    dense: DenseWeights,
    act: Activations,
}

/// One inference result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inference {
    pub y: Vec<FxValue>,
    pub cycles: CycleReport,
}

impl Inference {
    pub fn y_real(&self) -> Vec<f64> {
        self.y.iter().map(|v| v.to_real()).collect()
    }
}

impl QuantModel {
    pub fn new(meta: MetaParams, lstm: LstmWeights, dense: DenseWeights) -> Result<Self> {
        meta.validate()?;
        lstm.validate()?;
        let cfg = meta.fixed_point;
        check_len("hidden_size", meta.hidden_size, lstm.hidden_size())?;
        check_len("input_size", meta.input_size, lstm.input_size())?;
        check_len("out_features", meta.out_features, dense.out_features())?;
        check_len("dense weight columns", meta.in_features, dense.w.cols())?;
        let found = lstm
            .cfg()
            .into_iter()
            .chain(dense.b.iter().chain(dense.w.values()).map(|v| v.cfg()))
            .find(|&c| c != cfg);
        if let Some(bad) = found {
            return Err(Error::FormatMismatch {
                left: cfg,
                right: bad,
            });
        }
        let act = meta.activations()?;
        Ok(QuantModel {
            meta,
            lstm,
            dense,
            act,
        })
    }

    pub fn zeros(meta: MetaParams) -> Result<Self> {
        let cfg = meta.fixed_point;
        let lstm = LstmWeights::zeros(meta.hidden_size, meta.input_size, cfg);
        let dense = DenseWeights::zeros(meta.hidden_size, meta.out_features, cfg);
        Self::new(meta, lstm, dense)
    }

    pub fn from_raw(meta: MetaParams, t: &ModelTensors<i64>) -> Result<Self> {
        t.check_shapes(meta.hidden_size, meta.input_size, meta.out_features)?;
        let cfg = meta.fixed_point;
        Self::new(
            meta,
            LstmWeights::from_raw(&t.lstm, cfg)?,
            DenseWeights::from_raw(&t.dense, cfg)?,
        )
    }

    pub fn to_raw(&self) -> ModelTensors<i64> {
        ModelTensors {
            lstm: self.lstm.to_raw(),
            dense: self.dense.to_raw(),
        }
    }

    pub fn meta(&self) -> &MetaParams {
        &self.meta
    }

    pub fn cfg(&self) -> FxConfig {
        self.meta.fixed_point
    }

    pub fn lstm(&self) -> &LstmWeights {
        &self.lstm
    }

    pub fn dense(&self) -> &DenseWeights {
        &self.dense
    }

    pub fn activations(&self) -> &Activations {
        &self.act
    }

    pub fn datapath(&self) -> Datapath {
        Datapath::from_meta(&self.meta)
    }

    /// Same weights, different MAC engine.
    pub fn with_engine(&self, kind: EngineKind) -> Self {
        let mut m = self.clone();
        m.meta.engine = kind;
        m
    }

    /// Quantise a real-valued input sequence with the model's format.
    pub fn quantize_inputs(&self, seq: &[Vec<f64>]) -> Result<Vec<Vec<FxValue>>> {
        let cfg = self.cfg();
        seq.iter()
            .map(|x| x.iter().map(|&r| FxValue::from_real(r, cfg)).collect())
            .collect()
    }

    pub fn infer_real(&self, seq: &[Vec<f64>]) -> Result<Inference> {
        model_infer(&self.quantize_inputs(seq)?, self)
    }
}

/// LSTM layer followed by the dense layer.
pub fn model_infer(seq: &[Vec<FxValue>], m: &QuantModel) -> Result<Inference> {
    let dp = m.datapath();
    let trace = lstm_layer_trace(seq, &m.lstm, &m.act, &dp)?;
    let per_step = trace.iter().map(|(_, c)| *c).collect();
    let (last, _) = trace.into_iter().last().expect("non-empty sequence");
    let (y, dense_cycles) = dense_forward(&last.h, &m.dense, &dp)?;
    Ok(Inference {
        y,
        cycles: CycleReport::new(per_step, dense_cycles),
    })
}

/// Independent sequences, optionally fanned out; results keep input order.
pub fn infer_batch(m: &QuantModel, seqs: &[Vec<Vec<f64>>], exec: Exec) -> Result<Vec<Inference>> {
    par::try_map(exec, seqs, |s| m.infer_real(s))
}

fn real_dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// The same dataflow in real arithmetic with real-valued hard activations.
pub fn float_reference_infer(
    seq: &[Vec<f64>],
    fm: &ModelTensors<f64>,
    act: &RealActivations,
) -> Result<Vec<f64>> {
    let k = fm.lstm.b_i.len();
    let input = fm.lstm.w_i.first().map_or(0, Vec::len).saturating_sub(k);
    fm.check_shapes(k, input, fm.dense.b.len())?;
    if seq.is_empty() {
        return Err(Error::Empty("input sequence"));
    }
    let mut h = vec![0.0; k];
    let mut c = vec![0.0; k];
    for x_t in seq {
        check_len("input vector", input, x_t.len())?;
        let concat: Vec<f64> = h.iter().chain(x_t).copied().collect();
        let pre = |w: &Vec<Vec<f64>>, b: &Vec<f64>| -> Vec<f64> {
            w.iter()
                .zip(b)
                .map(|(row, b)| real_dot(row, &concat) + b)
                .collect()
        };
        let l = &fm.lstm;
        let i: Vec<f64> = pre(&l.w_i, &l.b_i)
            .into_iter()
            .map(|v| act.hardsigmoid(v))
            .collect();
        let f: Vec<f64> = pre(&l.w_f, &l.b_f)
            .into_iter()
            .map(|v| act.hardsigmoid(v))
            .collect();
        let g: Vec<f64> = pre(&l.w_g, &l.b_g)
            .into_iter()
            .map(|v| act.hardtanh(v))
            .collect();
        let o: Vec<f64> = pre(&l.w_o, &l.b_o)
            .into_iter()
            .map(|v| act.hardsigmoid(v))
            .collect();
        for u in 0..k {
            c[u] = f[u] * c[u] + i[u] * g[u];
            h[u] = o[u] * act.hardtanh(c[u]);
        }
    }
    Ok(fm
        .dense
        .w
        .iter()
        .zip(&fm.dense.b)
        .map(|(row, b)| real_dot(row, &h) + b)
        .collect())
}
