use nalgebra::{DMatrix, DVector};

use super::{Coordinate, Density, Sample};
use crate::error::{shape_err, Error, Result};
use crate::numerics::RngStream;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate Normal with mean `mu` and lower-triangular Cholesky factor `L`
/// (`Sigma = L L^T`).
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateNormalParams {
    mean: DVector<f64>,
    cholesky: DMatrix<f64>,
}

pub(crate) fn validate_cholesky(mean: &DVector<f64>, cholesky: &DMatrix<f64>) -> Result<()> {
    let d = mean.len();
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if cholesky.nrows() != d || cholesky.ncols() != d {
        return Err(shape_err(format!("Cholesky factor is {}x{}, mean has length {d}", cholesky.nrows(), cholesky.ncols())));
    }
    for a in 0..d {
        if !(cholesky[(a, a)] > 0.0) {
            return Err(Error::InvalidParameter(format!("Cholesky diagonal entry {a} must be > 0")));
        }
        for b in a + 1..d {
            if cholesky[(a, b)] != 0.0 {
                return Err(Error::InvalidParameter(format!("Cholesky factor has nonzero upper entry ({a},{b})")));
            }
        }
    }
    Ok(())
}

/// Lower-triangular coordinates `(a, b)`, `a >= b`, row-major.
pub(crate) fn chol_coordinates(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(|a| (0..=a).map(move |b| (a, b)))
}

pub(crate) fn elliptical_coordinates(d: usize) -> Vec<Coordinate> {
    (0..d).map(Coordinate::Mean).chain(chol_coordinates(d).map(|(a, b)| Coordinate::Chol(a, b))).collect()
}

pub(crate) fn elliptical_param(mean: &DVector<f64>, chol: &DMatrix<f64>, coord: Coordinate) -> Result<f64> {
    let d = mean.len();
    match coord {
        Coordinate::Mean(a) if a < d => Ok(mean[a]),
        Coordinate::Chol(a, b) if a < d && b <= a => Ok(chol[(a, b)]),
        other => Err(Error::InvalidParameter(format!("coordinate {other} not present"))),
    }
}

pub(crate) fn set_elliptical_param(mean: &mut DVector<f64>, chol: &mut DMatrix<f64>, coord: Coordinate, value: f64) -> Result<()> {
    let d = mean.len();
    match coord {
        Coordinate::Mean(a) if a < d => mean[a] = value,
        Coordinate::Chol(a, b) if a < d && b <= a => chol[(a, b)] = value,
        other => return Err(Error::InvalidParameter(format!("coordinate {other} not present"))),
    }
    Ok(())
}

impl MultivariateNormalParams {
    pub fn new(mean: DVector<f64>, cholesky: DMatrix<f64>) -> Result<Self> {
        validate_cholesky(&mean, &cholesky)?;
        Ok(Self { mean, cholesky })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim))
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.cholesky
    }

    /// `L^{-1} (z - mu)`.
    pub fn whiten(&self, z: &DVector<f64>) -> DVector<f64> {
        self.cholesky.solve_lower_triangular(&(z - &self.mean)).expect("Cholesky diagonal is positive")
    }

    /// `mu + L eps`.
    pub fn transform(&self, eps: &DVector<f64>) -> DVector<f64> {
        &self.mean + &self.cholesky * eps
    }

    pub(crate) fn ln_det_chol(&self) -> f64 {
        (0..self.dim()).map(|a| self.cholesky[(a, a)].ln()).sum()
    }

    /// `L^{-T} w`.
    pub(crate) fn solve_upper_transpose(&self, w: &DVector<f64>) -> DVector<f64> {
        self.cholesky.tr_solve_lower_triangular(w).expect("Cholesky diagonal is positive")
    }
}

impl Density for MultivariateNormalParams {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, z: &DVector<f64>) -> f64 {
        let w = self.whiten(z);
        -0.5 * self.dim() as f64 * LN_2PI - self.ln_det_chol() - 0.5 * w.norm_squared()
    }

    fn sample(&self, rng: &mut RngStream) -> Sample {
        let eps = DVector::from_vec(rng.normals(self.dim()));
        Sample { value: self.transform(&eps), component_index: None }
    }

    fn coordinates(&self) -> Vec<Coordinate> {
        elliptical_coordinates(self.dim())
    }

    fn param(&self, coord: Coordinate) -> Result<f64> {
        elliptical_param(&self.mean, &self.cholesky, coord)
    }

    fn with_param(&self, coord: Coordinate, value: f64) -> Result<Self> {
        let mut out = self.clone();
        set_elliptical_param(&mut out.mean, &mut out.cholesky, coord, value)?;
        validate_cholesky(&out.mean, &out.cholesky)?;
        Ok(out)
    }

    fn score(&self, z: &DVector<f64>) -> DVector<f64> {
        let d = self.dim();
        let w = self.whiten(z);
        let sinv_w = self.solve_upper_transpose(&w);
        let mut out = Vec::with_capacity(d + d * (d + 1) / 2);
        out.extend(sinv_w.iter().copied());
        for (a, b) in chol_coordinates(d) {
            let diag = if a == b { 1.0 / self.cholesky[(a, a)] } else { 0.0 };
            out.push(sinv_w[a] * w[b] - diag);
        }
        DVector::from_vec(out)
    }

    fn grad_log_density(&self, z: &DVector<f64>) -> DVector<f64> {
        -self.solve_upper_transpose(&self.whiten(z))
    }
}
