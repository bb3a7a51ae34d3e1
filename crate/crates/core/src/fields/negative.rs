use nalgebra::{DMatrix, DVector};

use super::mixture::{center_and_weight, logit_labels};
use super::{FieldProvider, VelocityFieldSet};
use crate::distributions::{Coordinate, Density, MixtureFamily, MixtureParams};
use crate::error::{shape_err, Error, Result};
use crate::numerics::ln_std_normal_cdf;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A cautionary logit field for diagonal Normals built from per-dimension
/// CDFs. It solves the transport equation pointwise, but for `D >= 2` the
/// flux `q v` does not vanish at infinity, so the estimator it induces is
/// biased.
pub fn negative_example_cdf_field(params: &MixtureParams, z: &DVector<f64>) -> Result<VelocityFieldSet> {
    if params.family() != MixtureFamily::DiagNormals {
        return Err(Error::InvalidParameter(format!("the CDF field is defined for diagonal Normals, got {}", params.family().name())));
    }
    let d = params.dim();
    if z.len() != d {
        return Err(shape_err(format!("point has length {}, D = {d}", z.len())));
    }
    let terms = params.component_terms(z);
    let scales = params.component_scales();
    let k = params.n_components();
    let mut u = DMatrix::zeros(d, k);
    for j in 0..k {
        for i in 0..d {
            let eps = terms.standardized[(j, i)];
            let ln_marginal = -LN_SQRT_2PI - 0.5 * eps * eps - scales[(j, i)].ln();
            let ln_rest = terms.log_components[j] - ln_marginal;
            u[(i, j)] = -(ln_std_normal_cdf(eps) + ln_rest - terms.log_density).exp() / d as f64;
        }
    }
    VelocityFieldSet::new(logit_labels(k), center_and_weight(u, &params.weights()))
}

/// Provider wrapper around [`negative_example_cdf_field`] (logits only).
#[derive(Debug, Clone)]
pub struct NegativeExampleFields {
    params: MixtureParams,
}

impl NegativeExampleFields {
    pub fn new(params: MixtureParams) -> Result<Self> {
        if params.family() != MixtureFamily::DiagNormals {
            return Err(Error::InvalidParameter("the CDF field is defined for diagonal Normals".into()));
        }
        Ok(Self { params })
    }
}

impl FieldProvider for NegativeExampleFields {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn coordinates(&self) -> Vec<Coordinate> {
        logit_labels(self.params.n_components())
    }

    fn fields(&self, z: &DVector<f64>) -> Result<VelocityFieldSet> {
        negative_example_cdf_field(&self.params, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{DiagNormals, SharedDiagCov};

    #[test]
    fn sums_to_zero_and_rejects_other_families() {
        let q: MixtureParams = DiagNormals::new(
            DVector::from_vec(vec![0.2, -0.1]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.5, -0.5]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.7, 0.6, 1.3]),
        )
        .unwrap()
        .into();
        let set = negative_example_cdf_field(&q, &DVector::from_vec(vec![0.4, 0.1])).unwrap();
        assert!(set.values().column_sum().amax() < 1e-12);
        let s: MixtureParams = SharedDiagCov::new(DVector::zeros(1), DMatrix::zeros(1, 1), DVector::from_element(1, 1.0)).unwrap().into();
        assert!(negative_example_cdf_field(&s, &DVector::zeros(1)).is_err());
    }
}
