use nalgebra::{DMatrix, DVector};

use super::mvn::{chol_coordinates, elliptical_coordinates, elliptical_param, set_elliptical_param, validate_cholesky};
use super::{Coordinate, Density, Sample};
use crate::error::{Error, Result};
use crate::numerics::special::ln_gamma;
use crate::numerics::RngStream;

/// Multivariate Student-t with `dof` degrees of freedom, location `mean`
/// and lower-triangular scale factor `cholesky`.
///
/// Sampled as a Gaussian scale mixture: `z = mu + tau^{-1/2} L eps` with
/// `tau ~ Gamma(dof/2, rate = dof/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentTParams {
    mean: DVector<f64>,
    cholesky: DMatrix<f64>,
    dof: f64,
}

impl StudentTParams {
    pub fn new(mean: DVector<f64>, cholesky: DMatrix<f64>, dof: f64) -> Result<Self> {
        validate_cholesky(&mean, &cholesky)?;
        if !(dof > 0.0) || !dof.is_finite() {
            return Err(Error::InvalidParameter(format!("degrees of freedom must be > 0, got {dof}")));
        }
        Ok(Self { mean, cholesky, dof })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.cholesky
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn whiten(&self, z: &DVector<f64>) -> DVector<f64> {
        self.cholesky.solve_lower_triangular(&(z - &self.mean)).expect("Cholesky diagonal is positive")
    }

    /// `(nu + D) / (nu + |w|^2)`, the factor multiplying the Gaussian score.
    fn score_weight(&self, w: &DVector<f64>) -> f64 {
        (self.dof + self.dim() as f64) / (self.dof + w.norm_squared())
    }
}

impl Density for StudentTParams {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, z: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let nu = self.dof;
        let w = self.whiten(z);
        let ln_det: f64 = (0..self.dim()).map(|a| self.cholesky[(a, a)].ln()).sum();
        ln_gamma(0.5 * (nu + d))
            - ln_gamma(0.5 * nu)
            - 0.5 * d * (nu * std::f64::consts::PI).ln()
            - ln_det
            - 0.5 * (nu + d) * (w.norm_squared() / nu).ln_1p()
    }

    fn sample(&self, rng: &mut RngStream) -> Sample {
        let tau = rng.gamma(0.5 * self.dof, 0.5 * self.dof);
        let eps = DVector::from_vec(rng.normals(self.dim()));
        let value = &self.mean + (&self.cholesky * eps) / tau.sqrt();
        Sample { value, component_index: None }
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
        let k = self.score_weight(&w);
        let sinv_w = self.cholesky.tr_solve_lower_triangular(&w).expect("positive diagonal") * k;
        let mut out = Vec::with_capacity(d + d * (d + 1) / 2);
        out.extend(sinv_w.iter().copied());
        for (a, b) in chol_coordinates(d) {
            let diag = if a == b { 1.0 / self.cholesky[(a, a)] } else { 0.0 };
            out.push(sinv_w[a] * w[b] - diag);
        }
        DVector::from_vec(out)
    }

    fn grad_log_density(&self, z: &DVector<f64>) -> DVector<f64> {
        let w = self.whiten(z);
        let k = self.score_weight(&w);
        -self.cholesky.tr_solve_lower_triangular(&w).expect("positive diagonal") * k
    }
}
