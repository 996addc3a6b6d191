//! Bit-exact simulator of a parameterised fixed-point LSTM accelerator for
//! small FPGAs, with a cycle/throughput/energy model and a resource estimator.
//!
//! Module map:
//!
//! * [`fixed_point`]: `(a, b)` numbers with explicit widening, rounding and saturation
//! * [`activations`]: HardTanh and the shift-based hard sigmoid (arithmetic, 1to1, step)
//! * [`mac_engine`]: scalar fused and five-stage pipelined MAC engines
//! * [`lstm_model`]: quantised LSTM cell, layer, dense layer and a real-valued reference
//! * [`quantizer`]: post-training quantisation and error measurement
//! * [`perf_model`]: op counts, schedules, throughput, efficiency and resource estimates
//! * [`config`]: accelerator meta-parameters
//! * [`par`]: rayon fan-out with a sequential fallback

pub mod activations;
pub mod config;
pub mod error;
pub mod fixed_point;
pub mod format;
pub mod lstm_model;
pub mod mac_engine;
pub mod par;
pub mod perf_model;
pub mod quantizer;
pub mod synthetic;

pub use config::MetaParams;
pub use error::{Error, Result};
pub use fixed_point::{FxConfig, FxValue};
pub use mac_engine::EngineKind;
pub use par::Exec;
