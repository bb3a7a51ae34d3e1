//! Pathwise gradient estimators built from velocity fields that solve the
//! transport equation, for multivariate Normals, Student-t and Normal mixtures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod avf;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod fields;
pub mod instances;
pub mod montecarlo;
pub mod numerics;
pub mod verification;

pub use error::{Error, Result};
