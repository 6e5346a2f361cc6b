//! Stochastic numerics for random series over Poisson and renewal arrivals.
//!
//! The library simulates renewal arrival streams `S_1 <= S_2 <= ...`, evaluates
//! random series `sum_n f(S_n)` for bounded oscillatory functions (sinc and its
//! relatives), and checks the empirical behaviour of those series against
//! analytic formulas: summation-by-parts (Abel) decompositions, Doob
//! decompositions of trigonometric sums, LePage series over one-sided Levy
//! measures, three-series diagnostics and characteristic functionals.
//!
//! Everything is deterministic given a master seed: samplers draw from
//! explicit counter-derived streams, so replicates can run in parallel (the
//! default `parallel` feature) or sequentially with identical output.

pub mod chf;
pub mod distributions;
pub mod error;
pub mod exec;
pub mod levy;
pub mod pointprocess;
pub mod quad;
pub mod rng;
pub mod series;
pub mod special;
pub mod trigsums;
pub mod util;

pub use error::{Error, Result};

/// Library version string embedded in report headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
