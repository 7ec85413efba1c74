pub mod classical;
pub mod cli;
pub mod config;
pub mod ergodicity;
pub mod error;
pub mod model;
pub mod output;
pub mod quantization;
pub mod scaling;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
