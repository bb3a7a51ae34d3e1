//! Single-sample gradient estimators and variance estimation.

mod gumbel;
mod test_function;

use nalgebra::{DMatrix, DVector};

use crate::distributions::{Coordinate, Density, MixtureParams, Sample};
use crate::error::{shape_err, Error, Result};
use crate::fields::{FieldProvider, MixtureFields};

pub use gumbel::{gumbel_softmax_grad, gumbel_softmax_grad_with, GumbelConfig, GumbelMode};
pub use test_function::{synthetic_coupling_matrix, TestFunction, TestFunctionKind};

/// `grad_z f(z) . v^{theta_p}(z)` for every coordinate the provider covers.
pub fn pathwise_grad<P: FieldProvider + ?Sized>(fields: &P, f: &TestFunction, z: &DVector<f64>) -> Result<DVector<f64>> {
    fields.pathwise(&f.gradient(z), z)
}

/// Plain score-function estimate `f(z) grad_theta log q(z)`, no baseline.
pub fn score_grad<D: Density>(dist: &D, f: &TestFunction, sample: &Sample) -> DVector<f64> {
    dist.score(&sample.value) * f.value(&sample.value)
}

/// Score-function estimates for the logits and responsibility-weighted
/// pathwise estimates for all component parameters, in canonical order.
pub fn hybrid_grad(dist: &MixtureParams, f: &TestFunction, sample: &Sample) -> Result<DVector<f64>> {
    let z = &sample.value;
    let k = dist.n_components();
    let logits = dist.score_logits(z) * f.value(z);
    let comp = MixtureFields::components_only(dist.clone()).pathwise(&f.gradient(z), z)?;
    let mut out = DVector::zeros(k + comp.len());
    out.rows_mut(0, k).copy_from(&logits);
    out.rows_mut(k, comp.len()).copy_from(&comp);
    Ok(out)
}

/// Per-sample, per-coordinate gradient estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBatch {
    coordinates: Vec<Coordinate>,
    samples: DMatrix<f64>,
}

impl GradientBatch {
    /// `samples` is `N x P`, one row per draw.
    pub fn new(coordinates: Vec<Coordinate>, samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() == 0 {
            return Err(Error::EmptyBatch);
        }
        if samples.ncols() != coordinates.len() {
            return Err(shape_err(format!("{} columns for {} coordinates", samples.ncols(), coordinates.len())));
        }
        Ok(Self { coordinates, samples })
    }

    pub fn from_rows(coordinates: Vec<Coordinate>, rows: &[DVector<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let p = coordinates.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(shape_err(format!("row of length {} for {p} coordinates", r.len())));
        }
        Self::new(coordinates, DMatrix::from_fn(rows.len(), p, |n, c| rows[n][c]))
    }

    pub fn coordinates(&self) -> &[Coordinate] {
        &self.coordinates
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.samples.row_mean().transpose()
    }
}

/// Per-coordinate variances and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub total: f64,
    pub per_coordinate: DVector<f64>,
}

/// `Var_p = (1/N) sum_n g_np^2 - mean_p^2`. A single-row batch yields the
/// uncentered second moment instead.
pub fn estimate_variance(batch: &GradientBatch) -> Result<VarianceEstimate> {
    let n = batch.n_samples();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let s = &batch.samples;
    let per_coordinate = DVector::from_fn(s.ncols(), |c, _| {
        let col = s.column(c);
        let second = col.norm_squared() / n as f64;
        if n == 1 {
            second
        } else {
            let mean = col.sum() / n as f64;
            (second - mean * mean).max(0.0)
        }
    });
    Ok(VarianceEstimate { total: per_coordinate.sum(), per_coordinate })
}
