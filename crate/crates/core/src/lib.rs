// Validation uses `!(x > 0.0)` so that NaN is rejected alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod groundstate;
pub mod markov;
pub mod rng;
pub mod search;
pub mod spectral;
pub mod stats;
pub mod walker;

pub use error::{Error, Result};
