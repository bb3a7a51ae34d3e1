use nalgebra::{DMatrix, DVector};

use super::{AvfParams, FieldProvider, VelocityFieldSet};
use crate::distributions::{Coordinate, MultivariateNormalParams, StudentTParams};
use crate::error::{shape_err, Result};

/// Fields for any elliptical family parameterized by `(mu, L)`: the
/// reparameterization fields plus the optional AVF null term.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticalFields {
    mean: DVector<f64>,
    cholesky: DMatrix<f64>,
    avf: Option<AvfParams>,
}

impl EllipticalFields {
    pub fn from_mvn(params: &MultivariateNormalParams, avf: Option<AvfParams>) -> Result<Self> {
        Self::build(params.mean().clone(), params.cholesky().clone(), avf)
    }

    pub fn from_student_t(params: &StudentTParams, avf: Option<AvfParams>) -> Result<Self> {
        Self::build(params.mean().clone(), params.cholesky().clone(), avf)
    }

    fn build(mean: DVector<f64>, cholesky: DMatrix<f64>, avf: Option<AvfParams>) -> Result<Self> {
        if let Some(a) = &avf {
            if a.dim() != mean.len() {
                return Err(shape_err(format!("AVF dimension {} for D = {}", a.dim(), mean.len())));
            }
        }
        Ok(Self { mean, cholesky, avf })
    }

    pub fn avf(&self) -> Option<&AvfParams> {
        self.avf.as_ref()
    }

    pub fn with_avf(&self, avf: Option<AvfParams>) -> Result<Self> {
        Self::build(self.mean.clone(), self.cholesky.clone(), avf)
    }

    fn check(&self, z: &DVector<f64>) -> Result<()> {
        if z.len() != self.mean.len() {
            return Err(shape_err(format!("point has length {}, D = {}", z.len(), self.mean.len())));
        }
        Ok(())
    }

    fn whiten(&self, z: &DVector<f64>) -> DVector<f64> {
        self.cholesky.solve_lower_triangular(&(z - &self.mean)).expect("Cholesky diagonal is positive")
    }

    /// Per Cholesky coordinate (row-major, `a >= b`): the reference projection
    /// `g_a w_b` and the elementary null projection `u_a w_b - u_b w_a`,
    /// where `g = grad f`, `u = L^T g`, `w = L^{-1}(z - mu)`.
    pub fn chol_projections(&self, grad_f: &DVector<f64>, z: &DVector<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(z)?;
        if grad_f.len() != z.len() {
            return Err(shape_err("gradient and point differ in length"));
        }
        let d = z.len();
        let w = self.whiten(z);
        let u = self.cholesky.tr_mul(grad_f);
        let n = d * (d + 1) / 2;
        let mut base = Vec::with_capacity(n);
        let mut null = Vec::with_capacity(n);
        for a in 0..d {
            for b in 0..=a {
                base.push(grad_f[a] * w[b]);
                null.push(u[a] * w[b] - u[b] * w[a]);
            }
        }
        Ok((base, null))
    }
}

impl FieldProvider for EllipticalFields {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn coordinates(&self) -> Vec<Coordinate> {
        let d = self.dim();
        (0..d).map(Coordinate::Mean).chain((0..d).flat_map(|a| (0..=a).map(move |b| Coordinate::Chol(a, b)))).collect()
    }

    fn fields(&self, z: &DVector<f64>) -> Result<VelocityFieldSet> {
        self.check(z)?;
        let d = z.len();
        let w = self.whiten(z);
        let p = d + d * (d + 1) / 2;
        let mut values = DMatrix::zeros(d, p);
        for a in 0..d {
            values[(a, a)] = 1.0;
        }
        let mut col = d;
        for a in 0..d {
            for b in 0..=a {
                values[(a, col)] += w[b];
                if let Some(avf) = &self.avf {
                    let s = avf.s(a, b);
                    if a != b && s != 0.0 {
                        for i in 0..d {
                            values[(i, col)] += s * (self.cholesky[(i, a)] * w[b] - self.cholesky[(i, b)] * w[a]);
                        }
                    }
                }
                col += 1;
            }
        }
        VelocityFieldSet::new(self.coordinates(), values)
    }

    fn pathwise(&self, grad_f: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (base, null) = self.chol_projections(grad_f, z)?;
        let d = z.len();
        let mut out = DVector::zeros(d + base.len());
        out.rows_mut(0, d).copy_from(grad_f);
        let mut k = 0;
        for a in 0..d {
            for b in 0..=a {
                let s = self.avf.as_ref().map_or(0.0, |avf| if a == b { 0.0 } else { avf.s(a, b) });
                out[d + k] = base[k] + s * null[k];
                k += 1;
            }
        }
        Ok(out)
    }
}

/// Fields of every coordinate of a multivariate Normal at `z`.
pub fn mvn_fields(params: &MultivariateNormalParams, avf: Option<&AvfParams>, z: &DVector<f64>) -> Result<VelocityFieldSet> {
    EllipticalFields::from_mvn(params, avf.cloned())?.fields(z)
}

/// Fields of every coordinate of a Student-t at `z`; the same form as the
/// Normal because both are elliptical.
pub fn student_t_fields(params: &StudentTParams, avf: Option<&AvfParams>, z: &DVector<f64>) -> Result<VelocityFieldSet> {
    EllipticalFields::from_student_t(params, avf.cloned())?.fields(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn random_mvn(d: usize, rng: &mut RngStream) -> MultivariateNormalParams {
        let mean = DVector::from_fn(d, |_, _| rng.normal());
        let chol = DMatrix::from_fn(d, d, |a, b| match a.cmp(&b) {
            std::cmp::Ordering::Greater => 0.5 * rng.normal(),
            std::cmp::Ordering::Equal => 0.5 + rng.uniform(),
            std::cmp::Ordering::Less => 0.0,
        });
        MultivariateNormalParams::new(mean, chol).unwrap()
    }

    #[test]
    fn identity_cholesky_example() {
        let q = MultivariateNormalParams::standard(2).unwrap();
        let z = DVector::from_vec(vec![3.0, 4.0]);
        let set = mvn_fields(&q, None, &z).unwrap();
        assert_eq!(set.field(Coordinate::Chol(1, 0)).unwrap().as_slice(), &[0.0, 3.0]);
        assert_eq!(set.field(Coordinate::Mean(0)).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn planar_rotation_null_field() {
        let q = MultivariateNormalParams::standard(2).unwrap();
        let s = 0.7;
        let avf = AvfParams::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DMatrix::from_row_slice(1, 2, &[0.0, s])).unwrap();
        let (x, y) = (0.4, -1.3);
        let z = DVector::from_vec(vec![x, y]);
        let rt = mvn_fields(&q, None, &z).unwrap();
        let full = mvn_fields(&q, Some(&avf), &z).unwrap();
        // s_{01} multiplies the (1,0) coordinate with a sign flip
        let diff = full.field(Coordinate::Chol(1, 0)).unwrap() - rt.field(Coordinate::Chol(1, 0)).unwrap();
        let s10 = avf.s(1, 0);
        assert_eq!(s10, 0.0);
        assert_eq!(diff.norm(), 0.0);
        let avf = AvfParams::new(DMatrix::from_row_slice(1, 2, &[0.0, 1.0]), DMatrix::from_row_slice(1, 2, &[s, 0.0])).unwrap();
        let full = mvn_fields(&q, Some(&avf), &z).unwrap();
        let diff = full.field(Coordinate::Chol(1, 0)).unwrap() - rt.field(Coordinate::Chol(1, 0)).unwrap();
        assert!((diff[0] - (-s * y)).abs() < 1e-15);
        assert!((diff[1] - s * x).abs() < 1e-15);
    }

    #[test]
    fn zero_avf_equals_reference() {
        let mut rng = RngStream::new(1, 0);
        let q = random_mvn(4, &mut rng);
        let z = DVector::from_fn(4, |_, _| rng.normal());
        let zero = AvfParams::zeros(2, 4).unwrap();
        assert_eq!(mvn_fields(&q, Some(&zero), &z).unwrap(), mvn_fields(&q, None, &z).unwrap());
    }

    #[test]
    fn fast_pathwise_matches_full_fields() {
        let mut rng = RngStream::new(2, 0);
        for d in [1, 3, 6] {
            let q = random_mvn(d, &mut rng);
            let avf = AvfParams::random(2, d, 0.8, &mut rng).unwrap();
            let prov = EllipticalFields::from_mvn(&q, Some(avf)).unwrap();
            let z = DVector::from_fn(d, |_, _| rng.normal());
            let g = DVector::from_fn(d, |_, _| rng.normal());
            let fast = prov.pathwise(&g, &z).unwrap();
            let slow = prov.fields(&z).unwrap().dot(&g).unwrap();
            assert!((fast - slow).amax() < 1e-12);
        }
    }

    #[test]
    fn student_t_fields_are_dof_independent() {
        let mut rng = RngStream::new(3, 0);
        let q = random_mvn(3, &mut rng);
        let t = StudentTParams::new(q.mean().clone(), q.cholesky().clone(), 1e6).unwrap();
        let avf = AvfParams::random(1, 3, 1.0, &mut rng).unwrap();
        let z = DVector::from_fn(3, |_, _| rng.normal());
        assert_eq!(student_t_fields(&t, Some(&avf), &z).unwrap(), mvn_fields(&q, Some(&avf), &z).unwrap());
    }

    #[test]
    fn rejects_mismatched_avf() {
        let q = MultivariateNormalParams::standard(3).unwrap();
        assert!(EllipticalFields::from_mvn(&q, Some(AvfParams::zeros(1, 2).unwrap())).is_err());
    }
}
