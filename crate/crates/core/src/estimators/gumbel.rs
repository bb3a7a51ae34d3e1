use nalgebra::DVector;

use crate::distributions::{softmax, Coordinate, Density, MixtureParams};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

use super::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GumbelMode {
    Soft,
    /// Arg-max one-hot forward pass, soft Jacobian backward pass.
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelConfig {
    pub temperature: f64,
    pub mode: GumbelMode,
}

impl GumbelConfig {
    pub fn new(temperature: f64, mode: GumbelMode) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::InvalidParameter(format!("temperature must be > 0, got {temperature}")));
        }
        Ok(Self { temperature, mode })
    }
}

/// Relaxed-categorical gradient for a diagonal-Normal mixture.
///
/// Draws `z = sum_k y_k (mu_k + eps * sigma_k)` with
/// `y = softmax((logits + G) / tau)` and differentiates through `y`. Biased.
/// Returns the sample and the per-coordinate gradient in canonical order.
pub fn gumbel_softmax_grad(
    dist: &MixtureParams,
    f: &TestFunction,
    cfg: GumbelConfig,
    rng: &mut RngStream,
) -> Result<(DVector<f64>, DVector<f64>)> {
    gumbel_softmax_grad_with(dist, |z| f.gradient(z), cfg, rng)
}

/// [`gumbel_softmax_grad`] with an arbitrary `grad_z f`.
pub fn gumbel_softmax_grad_with<G>(
    dist: &MixtureParams,
    grad_f: G,
    cfg: GumbelConfig,
    rng: &mut RngStream,
) -> Result<(DVector<f64>, DVector<f64>)>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let MixtureParams::DiagNormals(p) = dist else {
        return Err(Error::InvalidParameter(format!(
            "Gumbel-Softmax baseline is defined for diagonal Normals, got {}",
            dist.family().name()
        )));
    };
    let k = dist.n_components();
    let d = dist.dim();
    let tau = cfg.temperature;
    let perturbed = DVector::from_fn(k, |j, _| (p.logits()[j] + rng.gumbel()) / tau);
    let y = softmax(&perturbed);
    let eps = DVector::from_fn(d, |_, _| rng.normal());
    let x: Vec<DVector<f64>> = (0..k).map(|j| p.means().row(j).transpose() + p.scales().row(j).transpose().component_mul(&eps)).collect();
    let soft_z = x.iter().zip(y.iter()).fold(DVector::zeros(d), |acc, (xj, yj)| acc + xj * *yj);
    let forward = match cfg.mode {
        GumbelMode::Soft => y.clone(),
        GumbelMode::Hard => {
            let arg = y.argmax().0;
            DVector::from_fn(k, |j, _| if j == arg { 1.0 } else { 0.0 })
        }
    };
    let z = x.iter().zip(forward.iter()).fold(DVector::zeros(d), |acc, (xj, wj)| acc + xj * *wj);
    let g = grad_f(&z);
    let mut out = Vec::with_capacity(dist.coordinates().len());
    for c in dist.coordinates() {
        let v = match c {
            Coordinate::Logit(j) => y[j] * g.dot(&(&x[j] - &soft_z)) / tau,
            Coordinate::CompMean(j, i) => forward[j] * g[i],
            Coordinate::CompScale(j, i) => forward[j] * g[i] * eps[i],
            _ => unreachable!("diagonal Normals have no other coordinates"),
        };
        out.push(v);
    }
    Ok((z, DVector::from_vec(out)))
}
