use nalgebra::{DMatrix, DVector};

use crate::distributions::{Coordinate, Density, MixtureParams, MultivariateNormalParams, StudentTParams};
use crate::error::{Error, Result};
use crate::estimators::{TestFunction, TestFunctionKind};

/// Exact `grad_theta E_q[f]` in canonical coordinate order.
pub trait AnalyticGradient: Density {
    fn analytic_gradient(&self, f: &TestFunction) -> Result<DVector<f64>>;
}

/// Free-function form of [`AnalyticGradient::analytic_gradient`].
pub fn analytic_grad_oracle<D: AnalyticGradient>(dist: &D, f: &TestFunction) -> Result<DVector<f64>> {
    dist.analytic_gradient(f)
}

/// `(Q + Q^T, diag Q)` for the quadratic family, `None` for linear/constant.
fn quadratic_parts(f: &TestFunction) -> Result<Option<DMatrix<f64>>> {
    match f.kind() {
        TestFunctionKind::Quadratic => Ok(f.coupling_matrix().cloned()),
        TestFunctionKind::SqNorm => Ok(Some(DMatrix::identity(f.dim(), f.dim()))),
        TestFunctionKind::Linear | TestFunctionKind::Constant => Ok(None),
        other => Err(Error::UnsupportedOracle(other.name().into())),
    }
}

fn check_dim(f: &TestFunction, d: usize) -> Result<()> {
    if f.dim() != d {
        return Err(Error::Shape(format!("test function has D = {}, distribution D = {d}", f.dim())));
    }
    Ok(())
}

/// `E[z^T Q z] = mu^T Q mu + c tr(Q L L^T)` with covariance `c L L^T`.
fn elliptical_gradient(
    mean: &DVector<f64>,
    chol: &DMatrix<f64>,
    cov_factor: f64,
    coords: &[Coordinate],
    f: &TestFunction,
) -> Result<DVector<f64>> {
    let q = quadratic_parts(f)?;
    let grad_mean = match (&q, f.kind()) {
        (Some(q), _) => (q + q.transpose()) * mean,
        (None, TestFunctionKind::Linear) => f.direction().cloned().expect("linear coefficients"),
        _ => DVector::zeros(mean.len()),
    };
    let grad_chol = match &q {
        Some(q) => (q + q.transpose()) * chol * cov_factor,
        None => DMatrix::zeros(chol.nrows(), chol.ncols()),
    };
    Ok(DVector::from_iterator(
        coords.len(),
        coords.iter().map(|c| match *c {
            Coordinate::Mean(a) => grad_mean[a],
            Coordinate::Chol(a, b) => grad_chol[(a, b)],
            _ => unreachable!("elliptical coordinates only"),
        }),
    ))
}

impl AnalyticGradient for MultivariateNormalParams {
    fn analytic_gradient(&self, f: &TestFunction) -> Result<DVector<f64>> {
        check_dim(f, self.dim())?;
        elliptical_gradient(self.mean(), self.cholesky(), 1.0, &self.coordinates(), f)
    }
}

impl AnalyticGradient for StudentTParams {
    fn analytic_gradient(&self, f: &TestFunction) -> Result<DVector<f64>> {
        check_dim(f, self.dim())?;
        let nu = self.dof();
        let has_quadratic = quadratic_parts(f)?.is_some();
        if has_quadratic && nu <= 2.0 {
            return Err(Error::UnsupportedOracle(format!("second moment is infinite for dof {nu}")));
        }
        let factor = if has_quadratic { nu / (nu - 2.0) } else { 1.0 };
        elliptical_gradient(self.mean(), self.cholesky(), factor, &self.coordinates(), f)
    }
}

impl AnalyticGradient for MixtureParams {
    /// Per component `E_j = mu_j^T Q mu_j + sum_i Q_ii s_ji^2` (or `c . mu_j`);
    /// logit gradient `pi_j (E_j - E)`.
    fn analytic_gradient(&self, f: &TestFunction) -> Result<DVector<f64>> {
        check_dim(f, self.dim())?;
        let q = quadratic_parts(f)?;
        let means = self.component_means();
        let scales = self.component_scales();
        let (k, d) = means.shape();
        let pi = self.weights();
        let mu = |j: usize| means.row(j).transpose();
        let e = DVector::from_fn(k, |j, _| match (&q, f.kind()) {
            (Some(q), _) => {
                let m = mu(j);
                m.dot(&(q * &m)) + (0..d).map(|i| q[(i, i)] * scales[(j, i)].powi(2)).sum::<f64>()
            }
            (None, TestFunctionKind::Linear) => f.direction().expect("linear coefficients").dot(&mu(j)),
            _ => f.constant_value(),
        });
        let e_total = pi.dot(&e);
        // dE_j/d mu_j and dE_j/d s_ji
        let d_mean = |j: usize| -> DVector<f64> {
            match (&q, f.kind()) {
                (Some(q), _) => (q + q.transpose()) * mu(j),
                (None, TestFunctionKind::Linear) => f.direction().cloned().expect("linear coefficients"),
                _ => DVector::zeros(d),
            }
        };
        let d_scale = |j: usize, i: usize| -> f64 { q.as_ref().map_or(0.0, |q| 2.0 * q[(i, i)] * scales[(j, i)]) };
        let coords = self.coordinates();
        let mut out = DVector::zeros(coords.len());
        for (p, c) in coords.iter().enumerate() {
            out[p] = match *c {
                Coordinate::Logit(j) => pi[j] * (e[j] - e_total),
                Coordinate::CompMean(j, i) => pi[j] * d_mean(j)[i],
                Coordinate::CompScale(j, i) => pi[j] * d_scale(j, i),
                Coordinate::Scale(i) => {
                    let sigma = self.param(Coordinate::Scale(i))?;
                    (0..k).map(|j| pi[j] * d_scale(j, i) * scales[(j, i)] / sigma).sum()
                }
                Coordinate::Multiplier(j) => {
                    let lambda = self.param(Coordinate::Multiplier(j))?;
                    pi[j] * (0..d).map(|i| d_scale(j, i) * scales[(j, i)] / lambda).sum::<f64>()
                }
                _ => unreachable!("mixture coordinates only"),
            };
        }
        Ok(out)
    }
}
