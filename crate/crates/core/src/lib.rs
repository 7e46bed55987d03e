// Negated float comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod correlations;
pub mod ensemble;
pub mod error;
pub mod kernels;
mod lowrank;
pub mod noise;
pub mod propagate;
pub mod scenario;
pub mod seed;

pub use error::{EslnError, Result};
