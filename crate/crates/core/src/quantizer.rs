//! Post-training quantisation and quantisation-error measurement.

use serde::{Deserialize, Serialize};

use crate::config::MetaParams;
use crate::error::{Error, Result};
use crate::fixed_point::FxValue;
use crate::lstm_model::{float_reference_infer, ModelTensors, QuantModel};
use crate::par::{self, Exec};

/// Real-valued weights with the same layout as the quantised model.
pub type FloatModel = ModelTensors<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SaturationReport {
    /// Parameters clamped to a rail of the format.
    pub saturated: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub model: QuantModel,
    pub report: SaturationReport,
}

/// Round every weight and bias to `meta.fixed_point`.
pub fn quantize_model(fm: &FloatModel, meta: &MetaParams) -> Result<Quantized> {
    meta.validate()?;
    fm.check_shapes(meta.hidden_size, meta.input_size, meta.out_features)?;
    if let Some(&bad) = fm.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(bad));
    }
    let cfg = meta.fixed_point;
    let mut report = SaturationReport::default();
    for &w in fm.iter() {
        let (_, sat) = FxValue::from_real_reporting(w, cfg)?;
        report.total += 1;
        report.saturated += usize::from(sat);
    }
    let raws = fm.map(|&w| {
        FxValue::from_real(w, cfg)
            .expect("finiteness checked above")
            .raw()
    });
    Ok(Quantized {
        model: QuantModel::from_raw(meta.clone(), &raws)?,
        report,
    })
}

/// The quantised weights as reals.
pub fn dequantize_model(qm: &QuantModel) -> FloatModel {
    let res = qm.cfg().resolution();
    qm.to_raw().map(|&raw| raw as f64 * res)
}

/// Mean squared error between the real-valued reference and the de-quantised
/// fixed-point outputs, over every output of every sequence.
pub fn quantization_error(
    fm: &FloatModel,
    qm: &QuantModel,
    dataset: &[Vec<Vec<f64>>],
    exec: Exec,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let act = qm.meta().real_activations();
    let per_seq = par::try_map(exec, dataset, |seq| -> Result<(f64, usize)> {
        let reference = float_reference_infer(seq, fm, &act)?;
        let quant = qm.infer_real(seq)?.y_real();
        let sse = reference
            .iter()
            .zip(&quant)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((sse, reference.len()))
    })?;
    let (sse, n) = per_seq
        .into_iter()
        .fold((0.0, 0), |(s, n), (a, b)| (s + a, n + b));
    Ok(sse / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(k: usize, m: usize) -> MetaParams {
        MetaParams {
            hidden_size: k,
            in_features: k,
            input_size: m,
            ..MetaParams::default()
        }
    }

    #[test]
    fn weights_round_and_saturate() {
        let mut fm = FloatModel::filled(2, 1, 1, 0.0);
        fm.lstm.w_i[0][0] = 0.5;
        fm.lstm.b_o[1] = 100.0;
        fm.dense.w[0][1] = -0.03;
        let q = quantize_model(&fm, &meta(2, 1)).unwrap();
        let raw = q.model.to_raw();
        assert_eq!(raw.lstm.w_i[0][0], 8);
        assert_eq!(raw.lstm.b_o[1], 127);
        assert_eq!(raw.dense.w[0][1], 0);
        assert_eq!(
            q.report,
            SaturationReport {
                saturated: 1,
                total: 4 * (2 * 3 + 2) + 3
            }
        );
    }

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        let mut fm = FloatModel::filled(2, 1, 1, 0.0);
        fm.lstm.w_g[1][2] = f64::NAN;
        assert!(matches!(
            quantize_model(&fm, &meta(2, 1)),
            Err(Error::NonFinite(_))
        ));
        let fm = FloatModel::filled(2, 1, 1, 0.0);
        assert!(quantize_model(&fm, &meta(3, 1)).is_err());
    }

    #[test]
    fn representable_model_is_fixed_point() {
        let mut fm = FloatModel::filled(3, 2, 1, 0.0);
        fm.lstm.w_f[2][4] = -1.25;
        fm.dense.b[0] = 7.9375;
        let q = quantize_model(&fm, &meta(3, 2)).unwrap();
        assert_eq!(q.report.saturated, 0);
        assert_eq!(dequantize_model(&q.model), fm);
        let again = quantize_model(&dequantize_model(&q.model), &meta(3, 2)).unwrap();
        assert_eq!(again.model, q.model);
    }

    #[test]
    fn zero_model_has_zero_error() {
        let mut fm = FloatModel::filled(4, 1, 1, 0.0);
        fm.dense.b[0] = 0.375;
        let q = quantize_model(&fm, &meta(4, 1)).unwrap();
        let data = vec![vec![vec![0.2]; 5]; 3];
        assert_eq!(
            quantization_error(&fm, &q.model, &data, Exec::Parallel).unwrap(),
            0.0
        );
        assert!(quantization_error(&fm, &q.model, &[], Exec::Parallel).is_err());
    }
}
