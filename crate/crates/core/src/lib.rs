//! Finite-volume laboratory for porous-medium flow under a moving density
//! ceiling `m(x, t)`, with drift and source, and diagnostics for the
//! behaviour as the pressure exponent `k` grows.

pub mod barriers;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod grid;
pub mod limit;
pub mod output;
pub mod pressure;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod streamlines;

pub use error::{Error, Result};
