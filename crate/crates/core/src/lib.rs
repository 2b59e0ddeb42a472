pub mod correction;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
