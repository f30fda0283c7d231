pub mod error;
pub mod graph;
pub mod metrics;
pub mod protocol;
pub mod seed;
pub mod simnet;

pub use error::{Error, Result};
