pub mod analytic;
pub mod config;
pub mod error;
pub mod experiments;
pub mod model;
pub mod obe;
pub mod spectral;
pub mod switching;

pub use error::{NfsError, Result};
