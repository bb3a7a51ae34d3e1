//! Parameter containers, sampling, log densities and analytic scores.

mod mixture;
mod mvn;
mod student_t;

use std::fmt;

use nalgebra::DVector;

use crate::error::Result;
use crate::numerics::RngStream;

pub use mixture::{ComponentTerms, DiagNormals, Gsm, MixtureFamily, MixtureParams, SharedDiagCov, ZeroMeanGsm};
pub use mvn::MultivariateNormalParams;
pub use student_t::StudentTParams;

/// Label of one free parameter coordinate. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coordinate {
    /// Mean entry `a` of a single elliptical distribution.
    Mean(usize),
    /// Cholesky entry `(a, b)` with `a >= b`.
    Chol(usize, usize),
    /// Softmax logit of component `j`.
    Logit(usize),
    /// Mean of component `j`, dimension `i`.
    CompMean(usize, usize),
    /// Per-component scale of component `j`, dimension `i` (diagonal Normals).
    CompScale(usize, usize),
    /// Shared diagonal scale, dimension `i`.
    Scale(usize),
    /// Scale multiplier of component `j`.
    Multiplier(usize),
}

impl Coordinate {
    pub fn is_logit(&self) -> bool {
        matches!(self, Coordinate::Logit(_))
    }

    pub fn is_off_diagonal_chol(&self) -> bool {
        matches!(self, Coordinate::Chol(a, b) if a != b)
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coordinate::Mean(a) => write!(f, "mean[{a}]"),
            Coordinate::Chol(a, b) => write!(f, "chol[{a},{b}]"),
            Coordinate::Logit(j) => write!(f, "logit[{j}]"),
            Coordinate::CompMean(j, i) => write!(f, "comp_mean[{j},{i}]"),
            Coordinate::CompScale(j, i) => write!(f, "comp_scale[{j},{i}]"),
            Coordinate::Scale(i) => write!(f, "scale[{i}]"),
            Coordinate::Multiplier(j) => write!(f, "multiplier[{j}]"),
        }
    }
}

/// A draw `z`, with the ancestral component index for mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub value: DVector<f64>,
    pub component_index: Option<usize>,
}

/// Common interface over every supported family.
pub trait Density: Clone + Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, z: &DVector<f64>) -> f64;

    fn density(&self, z: &DVector<f64>) -> f64 {
        self.log_density(z).exp()
    }

    fn sample(&self, rng: &mut RngStream) -> Sample;

    /// Free parameter coordinates in canonical order.
    fn coordinates(&self) -> Vec<Coordinate>;

    fn param(&self, coord: Coordinate) -> Result<f64>;

    /// Copy with one coordinate replaced.
    fn with_param(&self, coord: Coordinate, value: f64) -> Result<Self>;

    /// `grad_theta log q(z)` over [`Density::coordinates`].
    fn score(&self, z: &DVector<f64>) -> DVector<f64>;

    /// `grad_z log q(z)`.
    fn grad_log_density(&self, z: &DVector<f64>) -> DVector<f64>;

    /// Closed-form `dq(z)/dtheta` where one is independent of the score.
    fn analytic_density_derivative(&self, _coord: Coordinate, _z: &DVector<f64>) -> Option<f64> {
        None
    }
}

/// Softmax with max-shift; shift invariant by construction.
pub fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let max = logits.max();
    let e = logits.map(|l| (l - max).exp());
    let s = e.sum();
    e / s
}

/// `ln softmax(logits)`.
pub fn log_softmax(logits: &DVector<f64>) -> DVector<f64> {
    let max = logits.max();
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.map(|l| l - lse)
}
