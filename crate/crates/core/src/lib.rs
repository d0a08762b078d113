// Negated comparisons such as `!(x > 0.0)` are how NaN inputs get rejected,
// and reference constants keep the digits they were published with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod asymptotics;
pub mod content;
pub mod error;
pub mod functional;
pub mod geometry;
pub mod kernel;
pub mod numerics;
pub mod oracle;

pub use error::{Error, Result};
pub use numerics::ValueWithError;
