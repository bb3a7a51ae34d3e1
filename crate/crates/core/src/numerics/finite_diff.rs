//! Central-difference helpers used by the verification oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiffConfig {
    pub step_h: f64,
}

impl Default for FiniteDiffConfig {
    fn default() -> Self {
        Self { step_h: 1e-5 }
    }
}

impl FiniteDiffConfig {
    pub fn new(step_h: f64) -> Result<Self> {
        if !(step_h > 0.0) || !step_h.is_finite() {
            return Err(Error::InvalidParameter(format!("finite-difference step must be > 0, got {step_h}")));
        }
        Ok(Self { step_h })
    }
}

/// Central difference of a scalar function of one variable.
pub fn central_diff<F>(f: F, x: f64, cfg: FiniteDiffConfig) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = cfg.step_h;
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// Central-difference gradient of a scalar field.
pub fn gradient<F>(f: F, point: &DVector<f64>, cfg: FiniteDiffConfig) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let h = cfg.step_h;
    let mut out = DVector::zeros(point.len());
    let mut p = point.clone();
    for i in 0..point.len() {
        p[i] = point[i] + h;
        let up = f(&p)?;
        p[i] = point[i] - h;
        let down = f(&p)?;
        p[i] = point[i];
        out[i] = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// Central-difference divergence of a single vector field.
pub fn finite_diff_divergence<F>(field: F, point: &DVector<f64>, cfg: FiniteDiffConfig) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let h = cfg.step_h;
    let mut p = point.clone();
    let mut div = 0.0;
    for i in 0..point.len() {
        p[i] = point[i] + h;
        let up = field(&p)?;
        p[i] = point[i] - h;
        let down = field(&p)?;
        p[i] = point[i];
        if up.len() != point.len() || down.len() != point.len() {
            return Err(Error::Shape(format!("field returned length {} at a point of dimension {}", up.len(), point.len())));
        }
        div += (up[i] - down[i]) / (2.0 * h);
    }
    Ok(div)
}

/// Divergences of many fields at once. `fields` maps a point to a `D x P`
/// matrix whose columns are the individual vector fields.
pub fn finite_diff_divergence_many<F>(fields: F, point: &DVector<f64>, cfg: FiniteDiffConfig) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let h = cfg.step_h;
    let mut p = point.clone();
    let mut div: Option<DVector<f64>> = None;
    for i in 0..point.len() {
        p[i] = point[i] + h;
        let up = fields(&p)?;
        p[i] = point[i] - h;
        let down = fields(&p)?;
        p[i] = point[i];
        if up.nrows() != point.len() {
            return Err(Error::Shape(format!("field matrix has {} rows, expected {}", up.nrows(), point.len())));
        }
        let acc = div.get_or_insert_with(|| DVector::zeros(up.ncols()));
        for c in 0..up.ncols() {
            acc[c] += (up[(i, c)] - down[(i, c)]) / (2.0 * h);
        }
    }
    Ok(div.unwrap_or_else(|| DVector::zeros(0)))
}
