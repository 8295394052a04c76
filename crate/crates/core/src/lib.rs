//! Nested stochastic primal-dual solver for multi-stage stochastic conic programs.

pub mod driver;
pub mod error;
pub mod geometry;
pub mod instances;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod parallel;
pub mod rates;
pub mod saddle;

pub use error::{Error, Result};
