//! Regression trees stopped early by the discrepancy principle.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod growth;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod pruning;
pub mod rng;
pub mod sim;
pub mod splitter;
pub mod tree;

pub use dataset::Dataset;
pub use error::{Error, Result};
