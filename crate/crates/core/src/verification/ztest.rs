use nalgebra::DVector;

use super::AnalyticGradient;
use crate::distributions::{Coordinate, Sample};
use crate::error::{shape_err, Result};
use crate::estimators::TestFunction;
use crate::montecarlo::{run_chunked, Execution, Moments, DEFAULT_CHUNK_SIZE};

/// Default two-sided threshold in standard errors. Per coordinate the false
/// alarm rate is about `6.3e-5`.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ZTestReport {
    pub coordinate: Coordinate,
    pub estimator_mean: f64,
    pub oracle_value: f64,
    pub standard_error: f64,
    pub z_score: f64,
    pub pass: bool,
}

/// One report per coordinate from accumulated estimator moments.
pub fn ztest_from_moments(
    coordinates: &[Coordinate],
    moments: &Moments,
    oracle: &DVector<f64>,
    threshold: f64,
) -> Result<Vec<ZTestReport>> {
    if coordinates.len() != oracle.len() || moments.sum.len() != oracle.len() {
        return Err(shape_err("coordinates, moments and oracle differ in length"));
    }
    let mean = moments.mean();
    let se = moments.std_error();
    Ok(coordinates
        .iter()
        .enumerate()
        .map(|(p, c)| {
            let diff = mean[p] - oracle[p];
            let z = if se[p] > 0.0 {
                diff / se[p]
            } else if diff.abs() <= 1e-12 * (1.0 + oracle[p].abs()) {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            ZTestReport {
                coordinate: *c,
                estimator_mean: mean[p],
                oracle_value: oracle[p],
                standard_error: se[p],
                z_score: z,
                pass: z.abs() <= threshold,
            }
        })
        .collect())
}

/// Draw `n_samples` from `dist`, apply `estimator` and z-test every
/// coordinate against the closed-form gradient.
pub fn unbiasedness_ztest<D, E>(
    estimator: E,
    dist: &D,
    f: &TestFunction,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<ZTestReport>>
where
    D: AnalyticGradient,
    E: Fn(&Sample) -> Result<DVector<f64>> + Sync + Send,
{
    let oracle = dist.analytic_gradient(f)?;
    let coords = dist.coordinates();
    let moments = run_chunked(n_samples, coords.len(), seed, 0, DEFAULT_CHUNK_SIZE, exec, |rng| estimator(&dist.sample(rng)))?.total();
    ztest_from_moments(&coords, &moments, &oracle, Z_THRESHOLD)
}
