//! Cost-based storage format advisor for materialized intermediate results
//! of DAG workflows.

pub mod cost;
pub mod crossover;
pub mod error;
pub mod fixtures;
pub mod formats;
pub mod layout;
pub mod oracle;
pub mod selector;
pub mod validate;
pub mod workflow;

pub use error::{Error, Result};
