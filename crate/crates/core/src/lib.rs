// `!(a > b)` is used throughout so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dsl;
pub mod ergodics;
pub mod error;
pub mod experiments;
pub mod homogenize;
pub mod model;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
