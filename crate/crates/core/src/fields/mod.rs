//! Closed-form solutions `v(z)` of `dq/dtheta + div(q v) = 0`, one per
//! free parameter coordinate.

mod avf;
mod elliptical;
mod geometry;
mod mixture;
mod negative;

use nalgebra::{DMatrix, DVector};

use crate::distributions::Coordinate;
use crate::error::{shape_err, Error, Result};

pub use avf::AvfParams;
pub use elliptical::{mvn_fields, student_t_fields, EllipticalFields};
pub use geometry::MixtureGeometry;
pub use mixture::{
    component_fields, logit_fields, logit_fields_diag_normals, logit_fields_gsm, logit_fields_shared_cov, logit_fields_zero_mean_gsm,
    pairwise_field, MixtureFieldOptions, MixtureFields, ReferenceMean,
};
pub use negative::{negative_example_cdf_field, NegativeExampleFields};

/// Velocity fields evaluated at one point: column `p` is `v^{theta_p}(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFieldSet {
    coordinates: Vec<Coordinate>,
    values: DMatrix<f64>,
}

impl VelocityFieldSet {
    pub fn new(coordinates: Vec<Coordinate>, values: DMatrix<f64>) -> Result<Self> {
        if coordinates.len() != values.ncols() {
            return Err(shape_err(format!("{} labels for {} field columns", coordinates.len(), values.ncols())));
        }
        Ok(Self { coordinates, values })
    }

    pub fn coordinates(&self) -> &[Coordinate] {
        &self.coordinates
    }

    /// `D x P` matrix of field values.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    pub fn field(&self, coord: Coordinate) -> Result<DVector<f64>> {
        let idx = self.coordinates.iter().position(|c| *c == coord).ok_or_else(|| Error::MissingField(coord.to_string()))?;
        Ok(self.values.column(idx).into_owned())
    }

    /// `grad_f . v` for every coordinate.
    pub fn dot(&self, grad_f: &DVector<f64>) -> Result<DVector<f64>> {
        if grad_f.len() != self.values.nrows() {
            return Err(shape_err(format!("gradient has length {}, fields have D = {}", grad_f.len(), self.values.nrows())));
        }
        Ok(self.values.tr_mul(grad_f))
    }

    /// Concatenate two sets over the same point.
    pub fn concat(self, other: VelocityFieldSet) -> Result<Self> {
        if self.values.nrows() != other.values.nrows() {
            return Err(shape_err("field sets differ in dimension"));
        }
        let d = self.values.nrows();
        let (p1, p2) = (self.len(), other.len());
        let mut values = DMatrix::zeros(d, p1 + p2);
        values.columns_mut(0, p1).copy_from(&self.values);
        values.columns_mut(p1, p2).copy_from(&other.values);
        let mut coordinates = self.coordinates;
        coordinates.extend(other.coordinates);
        Ok(Self { coordinates, values })
    }
}

/// A family of velocity fields bound to fixed parameters.
pub trait FieldProvider: Send + Sync {
    fn dim(&self) -> usize;

    /// Coordinates covered, in output order.
    fn coordinates(&self) -> Vec<Coordinate>;

    fn fields(&self, z: &DVector<f64>) -> Result<VelocityFieldSet>;

    /// `grad_f . v^{theta_p}(z)` for every covered coordinate.
    fn pathwise(&self, grad_f: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.fields(z)?.dot(grad_f)
    }
}
