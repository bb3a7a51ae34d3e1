use nalgebra::{DMatrix, DVector};

use crate::distributions::{Coordinate, Density, MixtureParams, MultivariateNormalParams, StudentTParams};
use crate::error::{shape_err, Error, Result};
use crate::fields::FieldProvider;

/// Affine frame `z = center + transform * (radius * direction)` defining
/// whitened radii.
#[derive(Debug, Clone, PartialEq)]
pub struct RayFrame {
    pub center: DVector<f64>,
    pub transform: DMatrix<f64>,
}

impl RayFrame {
    pub fn from_mvn(params: &MultivariateNormalParams) -> Self {
        Self { center: params.mean().clone(), transform: params.cholesky().clone() }
    }

    pub fn from_student_t(params: &StudentTParams) -> Self {
        Self { center: params.mean().clone(), transform: params.cholesky().clone() }
    }

    /// Centered at the mixture mean, scaled by the widest component per dimension.
    pub fn from_mixture(params: &MixtureParams) -> Self {
        let scales = params.component_scales();
        let widest = DVector::from_fn(params.dim(), |i, _| scales.column(i).max());
        Self { center: params.component_means().tr_mul(&params.weights()), transform: DMatrix::from_diagonal(&widest) }
    }

    pub fn point(&self, direction: &DVector<f64>, radius: f64) -> DVector<f64> {
        &self.center + &self.transform * (direction * radius)
    }
}

/// Relative flux below which a coordinate counts as vanishing on a ray.
pub const VANISHING_FLUX: f64 = 1e-12;

/// `|q(z) v(z)|` per coordinate at each radius along one ray.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    pub coordinates: Vec<Coordinate>,
    pub radii: Vec<f64>,
    /// `flux[r][p]`
    pub flux: Vec<DVector<f64>>,
}

impl DecayProfile {
    /// `flux[to][p] / flux[from][p]`, zero when both vanish.
    ///
    /// The denominator is floored at [`VANISHING_FLUX`] times the largest
    /// flux at `from`, so a field that vanishes along the ray up to rounding
    /// is measured against the scale of the others.
    pub fn ratio(&self, p: usize, from: usize, to: usize) -> f64 {
        let (a, b) = (self.flux[from][p], self.flux[to][p]);
        if b == 0.0 {
            return 0.0;
        }
        b / a.max(VANISHING_FLUX * self.flux[from].max())
    }

    pub fn max_ratio(&self, from: usize, to: usize) -> f64 {
        (0..self.coordinates.len()).map(|p| self.ratio(p, from, to)).fold(0.0, f64::max)
    }
}

/// Evaluate `|q v|` along `frame.point(direction, r)` for every radius.
pub fn boundary_decay_probe<D, P>(dist: &D, fields: &P, frame: &RayFrame, direction: &DVector<f64>, radii: &[f64]) -> Result<DecayProfile>
where
    D: Density,
    P: FieldProvider + ?Sized,
{
    if direction.len() != dist.dim() {
        return Err(shape_err(format!("direction has length {}, D = {}", direction.len(), dist.dim())));
    }
    if (direction.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("ray direction must be a unit vector".into()));
    }
    let mut flux = Vec::with_capacity(radii.len());
    for &r in radii {
        let z = frame.point(direction, r);
        let set = fields.fields(&z)?;
        let q = dist.density(&z);
        let v = set.values();
        flux.push(DVector::from_fn(v.ncols(), |p, _| q * v.column(p).norm()));
    }
    Ok(DecayProfile { coordinates: fields.coordinates(), radii: radii.to_vec(), flux })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::EllipticalFields;

    #[test]
    fn mvn_mean_field_decays_like_the_density() {
        let q = MultivariateNormalParams::standard(2).unwrap();
        let prov = EllipticalFields::from_mvn(&q, None).unwrap();
        let dir = DVector::from_vec(vec![0.6, 0.8]);
        let prof = boundary_decay_probe(&q, &prov, &RayFrame::from_mvn(&q), &dir, &[1.0, 10.0]).unwrap();
        let expected = (-0.5f64 * 99.0).exp();
        assert!((prof.ratio(0, 0, 1) / expected - 1.0).abs() < 1e-9);
        assert!(prof.max_ratio(0, 1) < 1e-8);
    }

    #[test]
    fn rejects_non_unit_direction() {
        let q = MultivariateNormalParams::standard(2).unwrap();
        let prov = EllipticalFields::from_mvn(&q, None).unwrap();
        let dir = DVector::from_vec(vec![1.0, 1.0]);
        assert!(boundary_decay_probe(&q, &prov, &RayFrame::from_mvn(&q), &dir, &[1.0]).is_err());
    }
}
