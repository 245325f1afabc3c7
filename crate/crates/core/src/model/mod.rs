//! Patch-based attention network for multi-day risk classification, with
//! switches that swap individual blocks for simpler stand-ins.

mod checkpoint;
mod config;
pub mod layers;
mod network;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use config::{ModelConfig, Variant};
pub(crate) use config::parse_value;
pub use network::{encode_windows, ForwardTrace, SeizureFormer};

/// Probability clamp used by the training loss.
pub const BCE_EPS: f64 = 1e-7;
