pub mod error;
pub mod tensor;

pub use error::{Error, Result};
pub mod data;
pub mod metrics;
pub mod synth;
pub mod model;
pub mod train;
pub mod baselines;
pub mod experiment;
pub mod diagnostics;
pub mod cli;
