//! Concordance-index consistency toolkit for right-censored survival data.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod censoring;
pub mod data;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod num;
pub mod optim;
pub mod quad;
pub mod ranking;

pub use error::{Error, Result};
