//! Accelerator meta-parameters.
//!
//! The first eight fields are the accelerator template's meta-parameters and keep
//! their original spelling on the wire (`ALU_resource_type`, ...). The rest are
//! simulator extensions: number format, MAC engine, ALU count, sequence
//! length, clock, power and layer count.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activations::{
    HardSigmoid, HardSigmoidMethod, HardSigmoidParams, HardTanhParams, RealActivations,
};
use crate::error::{Error, Result};
use crate::fixed_point::FxConfig;
use crate::mac_engine::EngineKind;
use crate::perf_model::ElementwiseCosts;

pub const HIDDEN_SIZE_RANGE: (usize, usize) = (1, 200);
pub const INPUT_SIZE_RANGE: (usize, usize) = (1, 10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AluResource {
    #[serde(rename = "DSP")]
    Dsp,
    #[serde(rename = "LUT")]
    Lut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightResource {
    #[serde(rename = "LUTRAM")]
    Lutram,
    #[serde(rename = "BRAM")]
    Bram,
    #[serde(rename = "AUTO")]
    Auto,
}

macro_rules! string_enum {
    ($ty:ty { $($text:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}`; expected one of ", $($text, " "),+),
                        other
                    ))),
                }
            }
        }
    };
}

string_enum!(AluResource { "DSP" => AluResource::Dsp, "LUT" => AluResource::Lut });
string_enum!(WeightResource {
    "LUTRAM" => WeightResource::Lutram,
    "BRAM" => WeightResource::Bram,
    "AUTO" => WeightResource::Auto,
});
string_enum!(HardSigmoidMethod {
    "arithmetic" => HardSigmoidMethod::Arithmetic,
    "1to1" => HardSigmoidMethod::OneToOne,
    "step" => HardSigmoidMethod::Step,
});

impl fmt::Display for AluResource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AluResource::Dsp => "DSP",
            AluResource::Lut => "LUT",
        })
    }
}

impl fmt::Display for WeightResource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightResource::Lutram => "LUTRAM",
            WeightResource::Bram => "BRAM",
            WeightResource::Auto => "AUTO",
        })
    }
}

/// HardTanh clamp bounds, given as reals on the fixed-point grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub min_val: f64,
    pub max_val: f64,
}

impl FromStr for Threshold {
    type Err = Error;

    /// Parses `min,max`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("HardTanh_threshold `{s}` must be `min,max`"));
        let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
        Ok(Threshold {
            min_val: lo.trim().parse().map_err(|_| bad())?,
            max_val: hi.trim().parse().map_err(|_| bad())?,
        })
    }
}

fn default_layers() -> usize {
    1
}

fn default_slope_shift() -> u32 {
    HardSigmoidParams::DEFAULT_SLOPE_SHIFT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
/// Missing fields in a JSON file take their [`Default`] values.
#[serde(default, deny_unknown_fields)]
pub struct MetaParams {
    pub hidden_size: usize,
    pub input_size: usize,
    #[serde(rename = "ALU_resource_type")]
    pub alu_resource_type: AluResource,
    pub weight_resource_type: WeightResource,
    #[serde(rename = "HardSigmoid_method")]
    pub hardsigmoid_method: HardSigmoidMethod,
    #[serde(rename = "HardTanh_threshold")]
    pub hardtanh_threshold: Threshold,
    pub in_features: usize,
    pub out_features: usize,

    pub fixed_point: FxConfig,
    pub engine: EngineKind,
    pub num_parallel_alus: usize,
    pub seq_len: usize,
    pub clock_hz: f64,
    pub power_w: f64,
    #[serde(default = "default_layers")]
    pub num_lstm_layers: usize,
    #[serde(default = "default_slope_shift")]
    pub hardsigmoid_slope_shift: u32,
    #[serde(default)]
    pub elementwise_costs: ElementwiseCosts,
}

impl Default for MetaParams {
    /// The evaluated deployment: K=20, M=1, one output, (4,8), pipelined
    /// ALUs with the step sigmoid at 204 MHz and 57 mW.
    fn default() -> Self {
        MetaParams {
            hidden_size: 20,
            input_size: 1,
            alu_resource_type: AluResource::Dsp,
            weight_resource_type: WeightResource::Auto,
            hardsigmoid_method: HardSigmoidMethod::Step,
            hardtanh_threshold: Threshold {
                min_val: -1.0,
                max_val: 1.0,
            },
            in_features: 20,
            out_features: 1,
            fixed_point: FxConfig::Q4_8,
            engine: EngineKind::Pipelined,
            num_parallel_alus: 2,
            seq_len: 6,
            clock_hz: 204e6,
            power_w: 0.057,
            num_lstm_layers: 1,
            hardsigmoid_slope_shift: HardSigmoidParams::DEFAULT_SLOPE_SHIFT,
            elementwise_costs: ElementwiseCosts::default(),
        }
    }
}

fn in_range(name: &str, v: usize, (lo, hi): (usize, usize)) -> Result<()> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} = {v} is outside the supported range [{lo}, {hi}]"
        )))
    }
}

impl MetaParams {
    pub fn validate(&self) -> Result<()> {
        in_range("hidden_size", self.hidden_size, HIDDEN_SIZE_RANGE)?;
        in_range("input_size", self.input_size, INPUT_SIZE_RANGE)?;
        if self.in_features != self.hidden_size {
            return Err(Error::Config(format!(
                "in_features = {} must equal hidden_size = {} (the dense layer reads the final hidden state)",
                self.in_features, self.hidden_size
            )));
        }
        in_range("out_features", self.out_features, (1, usize::MAX))?;
        in_range("num_parallel_alus", self.num_parallel_alus, (1, usize::MAX))?;
        in_range("seq_len", self.seq_len, (1, usize::MAX))?;
        in_range("num_lstm_layers", self.num_lstm_layers, (1, usize::MAX))?;
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(Error::Config(format!(
                "clock_hz = {} must be positive",
                self.clock_hz
            )));
        }
        if !(self.power_w.is_finite() && self.power_w > 0.0) {
            return Err(Error::Config(format!(
                "power_w = {} must be positive",
                self.power_w
            )));
        }
        self.activations()?;
        Ok(())
    }

    pub fn hardtanh_params(&self) -> Result<HardTanhParams> {
        HardTanhParams::from_reals(
            self.fixed_point,
            self.hardtanh_threshold.min_val,
            self.hardtanh_threshold.max_val,
        )
    }

    pub fn hardsigmoid_params(&self) -> Result<HardSigmoidParams> {
        HardSigmoidParams::new(
            self.fixed_point,
            self.hardsigmoid_slope_shift,
            HardSigmoidParams::DEFAULT_LOWER,
            HardSigmoidParams::DEFAULT_UPPER,
        )
    }

    pub fn activations(&self) -> Result<Activations> {
        Ok(Activations {
            tanh: self.hardtanh_params()?,
            sigmoid: HardSigmoid::new(self.hardsigmoid_params()?, self.hardsigmoid_method)?,
        })
    }

    pub fn real_activations(&self) -> RealActivations {
        RealActivations {
            tanh_min: self.hardtanh_threshold.min_val,
            tanh_max: self.hardtanh_threshold.max_val,
            sigmoid_slope: (-(self.hardsigmoid_slope_shift as f64)).exp2(),
            sigmoid_lower: HardSigmoidParams::DEFAULT_LOWER,
            sigmoid_upper: HardSigmoidParams::DEFAULT_UPPER,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let meta: MetaParams =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("meta-parameters always serialise")
    }
}

/// Activation units instantiated for one working format.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub tanh: HardTanhParams,
    pub sigmoid: HardSigmoid,
}
