//! Library surface of the experiment runner; the `sincint` binary is a thin
//! wrapper over these modules, and the integration tests drive them directly.

pub mod config;
pub mod experiments;
pub mod output;
