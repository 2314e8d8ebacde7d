//! Dictionary learning with block total least squares (BLOTLESS) dictionary updates.

// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dict_update;
pub mod error;
pub mod experiments;
pub mod imaging;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod sparse_coding;
pub mod synth;

pub use error::{Error, Result};
pub use model::{Dictionary, SparseCoeffs, SupportPattern, TrainingSet};
pub use numerics::Matrix;
