use nalgebra::{DMatrix, DVector};

use crate::distributions::{Coordinate, Density};
use crate::error::{Error, Result};
use crate::fields::FieldProvider;
use crate::numerics::{central_diff, finite_diff_divergence, finite_diff_divergence_many, FiniteDiffConfig};

/// Denominator floor of the relative residual.
pub const RESIDUAL_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub coordinate: Coordinate,
    pub point: DVector<f64>,
    /// `dq/dtheta`
    pub source_term: f64,
    /// `div(q v)`
    pub divergence_term: f64,
    pub density: f64,
    /// `|source + divergence| / max(q, floor)`
    pub relative_residual: f64,
}

fn report(coordinate: Coordinate, z: &DVector<f64>, source: f64, div: f64, q: f64) -> Result<ResidualReport> {
    if !source.is_finite() || !div.is_finite() {
        return Err(Error::NonFinite(format!("residual terms for {coordinate} at {:?}", z.as_slice())));
    }
    Ok(ResidualReport {
        coordinate,
        point: z.clone(),
        source_term: source,
        divergence_term: div,
        density: q,
        relative_residual: (source + div).abs() / q.max(RESIDUAL_FLOOR),
    })
}

fn source_term<D: Density>(dist: &D, coord: Coordinate, z: &DVector<f64>, cfg: FiniteDiffConfig) -> Result<f64> {
    if let Some(s) = dist.analytic_density_derivative(coord, z) {
        return Ok(s);
    }
    let theta = dist.param(coord)?;
    central_diff(|x| Ok(dist.with_param(coord, x)?.density(z)), theta, cfg)
}

/// Residual of `dq/dtheta + div(q v) = 0` for one coordinate and field.
pub fn transport_residual<D, F>(
    dist: &D,
    coordinate: Coordinate,
    field: F,
    z: &DVector<f64>,
    cfg: FiniteDiffConfig,
) -> Result<ResidualReport>
where
    D: Density,
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let source = source_term(dist, coordinate, z, cfg)?;
    let div = finite_diff_divergence(|x| Ok(field(x)? * dist.density(x)), z, cfg)?;
    report(coordinate, z, source, div, dist.density(z))
}

/// Residual of `div(q v) = 0` for a null field.
pub fn null_residual<D, F>(dist: &D, coordinate: Coordinate, field: F, z: &DVector<f64>, cfg: FiniteDiffConfig) -> Result<ResidualReport>
where
    D: Density,
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let div = finite_diff_divergence(|x| Ok(field(x)? * dist.density(x)), z, cfg)?;
    report(coordinate, z, 0.0, div, dist.density(z))
}

/// Residuals of every coordinate a provider covers, sharing field evaluations.
pub fn transport_residuals<D, P>(dist: &D, fields: &P, z: &DVector<f64>, cfg: FiniteDiffConfig) -> Result<Vec<ResidualReport>>
where
    D: Density,
    P: FieldProvider + ?Sized,
{
    let flux = |x: &DVector<f64>| -> Result<DMatrix<f64>> { Ok(fields.fields(x)?.values() * dist.density(x)) };
    let div = finite_diff_divergence_many(flux, z, cfg)?;
    let q = dist.density(z);
    fields.coordinates().into_iter().enumerate().map(|(p, c)| report(c, z, source_term(dist, c, z, cfg)?, div[p], q)).collect()
}
