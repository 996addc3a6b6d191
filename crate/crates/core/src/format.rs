//! JSON file formats: float models, quantised models and input sequences.
//!
//! Quantised weights are stored as raw integers next to the meta-parameters
//! (which carry the fixed-point format), so files are bit-exact.

use serde::{Deserialize, Serialize};

use crate::config::MetaParams;
use crate::error::{Error, Result};
use crate::lstm_model::{ModelTensors, QuantModel};
use crate::quantizer::{FloatModel, SaturationReport};

pub const QUANT_MODEL_FORMAT: &str = "fxlstm-quant-model";
pub const QUANT_MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantModelFile {
    pub format: String,
    pub version: u32,
    pub meta: MetaParams,
    pub weights: ModelTensors<i64>,
    #[serde(default)]
    pub saturation: SaturationReport,
}

impl QuantModelFile {
    pub fn new(model: &QuantModel, saturation: SaturationReport) -> Self {
        QuantModelFile {
            format: QUANT_MODEL_FORMAT.into(),
            version: QUANT_MODEL_VERSION,
            meta: model.meta().clone(),
            weights: model.to_raw(),
            saturation,
        }
    }

    pub fn into_model(self) -> Result<QuantModel> {
        if self.format != QUANT_MODEL_FORMAT || self.version != QUANT_MODEL_VERSION {
            return Err(Error::Config(format!(
                "unsupported model file {} v{}",
                self.format, self.version
            )));
        }
        QuantModel::from_raw(self.meta, &self.weights)
    }
}

fn parse<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{what}: {e}")))
}

pub fn parse_float_model(text: &str) -> Result<FloatModel> {
    parse("float model", text)
}

pub fn parse_quant_model(text: &str) -> Result<QuantModel> {
    parse::<QuantModelFile>("quantised model", text)?.into_model()
}

/// Input sequences: `[[[x_0 features], [x_1 features], ...], ...]`.
pub fn parse_sequences(text: &str) -> Result<Vec<Vec<Vec<f64>>>> {
    let seqs: Vec<Vec<Vec<f64>>> = parse("input sequences", text)?;
    if seqs.is_empty() {
        return Err(Error::Empty("input sequences"));
    }
    Ok(seqs)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("file types always serialise")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quant_model_file_round_trip() {
        let meta = MetaParams {
            hidden_size: 2,
            in_features: 2,
            ..MetaParams::default()
        };
        let mut t = ModelTensors::filled(2, 1, 1, 0i64);
        t.lstm.w_o[1][2] = -128;
        t.dense.b[0] = 127;
        let model = QuantModel::from_raw(meta, &t).unwrap();
        let text = to_json(&QuantModelFile::new(&model, SaturationReport::default()));
        assert!(text.contains(QUANT_MODEL_FORMAT));
        assert_eq!(parse_quant_model(&text).unwrap(), model);
    }

    #[test]
    fn bad_files() {
        assert!(parse_quant_model("{}").is_err());
        assert!(parse_sequences("[]").is_err());
        assert!(parse_sequences("[[[1.0, \"x\"]]]").is_err());
        assert_eq!(
            parse_sequences("[[[1.0],[2.0]]]").unwrap(),
            vec![vec![vec![1.0], vec![2.0]]]
        );
    }
}
