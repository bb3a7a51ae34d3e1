//! Random problem instances shared by tests, benchmarks and the CLI.

use nalgebra::{DMatrix, DVector};

use crate::distributions::{
    DiagNormals, Gsm, MixtureFamily, MixtureParams, MultivariateNormalParams, SharedDiagCov, StudentTParams, ZeroMeanGsm,
};
use crate::error::Result;
use crate::numerics::RngStream;

fn uniform_vec(n: usize, lo: f64, hi: f64, rng: &mut RngStream) -> DVector<f64> {
    DVector::from_fn(n, |_, _| lo + (hi - lo) * rng.uniform())
}

/// Lower-triangular factor with diagonal in `[0.5, 1.5]` and off-diagonal `N(0, 0.3^2)`.
pub fn random_cholesky(d: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..a {
            l[(a, b)] = 0.3 * rng.normal();
        }
        l[(a, a)] = 0.5 + rng.uniform();
    }
    l
}

pub fn random_mvn(d: usize, rng: &mut RngStream) -> Result<MultivariateNormalParams> {
    let mean = DVector::from_fn(d, |_, _| rng.normal());
    MultivariateNormalParams::new(mean, random_cholesky(d, rng))
}

pub fn random_student_t(d: usize, dof: f64, rng: &mut RngStream) -> Result<StudentTParams> {
    let mean = DVector::from_fn(d, |_, _| rng.normal());
    StudentTParams::new(mean, random_cholesky(d, rng), dof)
}

/// Zero mean, `L = I + r dL` with strictly lower `dL` entries uniform on `[0, 1)`.
pub fn offdiag_mvn(d: usize, r: f64, rng: &mut RngStream) -> Result<MultivariateNormalParams> {
    let mut l = DMatrix::identity(d, d);
    for a in 0..d {
        for b in 0..a {
            l[(a, b)] = r * rng.uniform();
        }
    }
    MultivariateNormalParams::new(DVector::zeros(d), l)
}

/// Moderately overlapping mixture: logits `N(0, 0.5^2)`, means `N(0, 1)`,
/// scales in `[0.6, 1.4]`, multipliers in `[0.6, 1.6]`.
pub fn random_mixture(family: MixtureFamily, k: usize, d: usize, rng: &mut RngStream) -> Result<MixtureParams> {
    let logits = DVector::from_fn(k, |_, _| 0.5 * rng.normal());
    let means = DMatrix::from_fn(k, d, |_, _| rng.normal());
    let scale = uniform_vec(d, 0.6, 1.4, rng);
    let mults = uniform_vec(k, 0.6, 1.6, rng);
    Ok(match family {
        MixtureFamily::SharedDiagCov => SharedDiagCov::new(logits, means, scale)?.into(),
        MixtureFamily::ZeroMeanGsm => ZeroMeanGsm::new(logits, scale, mults)?.into(),
        MixtureFamily::Gsm => Gsm::new(logits, means, scale, mults)?.into(),
        MixtureFamily::DiagNormals => {
            let scales = DMatrix::from_fn(k, d, |_, _| 0.6 + 0.8 * rng.uniform());
            DiagNormals::new(logits, means, scales)?.into()
        }
    })
}

/// Near-disjoint geometry: equal logits, means uniform on the sphere of
/// radius 2 (zero for the zero-mean family), scales and multipliers within
/// 10% of one.
pub fn sphere_mixture(family: MixtureFamily, k: usize, d: usize, rng: &mut RngStream) -> Result<MixtureParams> {
    let logits = DVector::zeros(k);
    let means = DMatrix::from_fn(k, d, |_, _| rng.normal());
    let means = DMatrix::from_fn(k, d, |j, i| 2.0 * means[(j, i)] / means.row(j).norm());
    let scale = uniform_vec(d, 0.9, 1.1, rng);
    let mults = uniform_vec(k, 0.9, 1.1, rng);
    Ok(match family {
        MixtureFamily::SharedDiagCov => SharedDiagCov::new(logits, means, scale)?.into(),
        MixtureFamily::ZeroMeanGsm => ZeroMeanGsm::new(logits, scale, mults)?.into(),
        MixtureFamily::Gsm => Gsm::new(logits, means, scale, mults)?.into(),
        MixtureFamily::DiagNormals => {
            let scales = DMatrix::from_fn(k, d, |_, _| 0.9 + 0.2 * rng.uniform());
            DiagNormals::new(logits, means, scales)?.into()
        }
    })
}

/// Uniformly distributed unit vector.
pub fn random_direction(d: usize, rng: &mut RngStream) -> DVector<f64> {
    let v = DVector::from_fn(d, |_, _| rng.normal());
    let n = v.norm();
    v / n
}
