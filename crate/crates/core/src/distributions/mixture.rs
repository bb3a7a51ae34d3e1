//! The four Normal-mixture families with closed-form logit velocity fields.
//!
//! Every family reduces to `K` diagonal Gaussians with effective means
//! `mu_j` and effective per-dimension scales `s_j`:
//!
//! | family          | `mu_j` | `s_ji`            |
//! |-----------------|--------|-------------------|
//! | SharedDiagCov   | `mu_j` | `sigma_i`         |
//! | ZeroMeanGsm     | `0`    | `lambda_j sigma_i`|
//! | Gsm             | `mu_j` | `lambda_j sigma_i`|
//! | DiagNormals     | `mu_j` | `sigma_ji`        |
//!
//! Weights are always `softmax(logits)`.

use nalgebra::{DMatrix, DVector};

use super::mvn::LN_2PI;
use super::{log_softmax, softmax, Coordinate, Density, Sample};
use crate::error::{shape_err, Error, Result};
use crate::numerics::{log_sum_exp, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixtureFamily {
    SharedDiagCov,
    ZeroMeanGsm,
    Gsm,
    DiagNormals,
}

impl MixtureFamily {
    pub const ALL: [MixtureFamily; 4] =
        [MixtureFamily::SharedDiagCov, MixtureFamily::ZeroMeanGsm, MixtureFamily::Gsm, MixtureFamily::DiagNormals];

    pub fn name(&self) -> &'static str {
        match self {
            MixtureFamily::SharedDiagCov => "shared_diag_cov",
            MixtureFamily::ZeroMeanGsm => "zero_mean_gsm",
            MixtureFamily::Gsm => "gsm",
            MixtureFamily::DiagNormals => "diag_normals",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// Effective diagonal-Gaussian view shared by all families.
#[derive(Debug, Clone, PartialEq)]
struct Components {
    means: DMatrix<f64>,
    scales: DMatrix<f64>,
    log_weights: DVector<f64>,
    /// `-D/2 ln 2pi - sum_i ln s_ji`
    log_norm: DVector<f64>,
}

impl Components {
    fn new(logits: &DVector<f64>, means: DMatrix<f64>, scales: DMatrix<f64>) -> Self {
        let d = means.ncols();
        let log_norm =
            DVector::from_fn(scales.nrows(), |j, _| -0.5 * d as f64 * LN_2PI - scales.row(j).iter().map(|s| s.ln()).sum::<f64>());
        Self { means, scales, log_weights: log_softmax(logits), log_norm }
    }
}

fn check_logits(logits: &DVector<f64>) -> Result<usize> {
    if logits.is_empty() {
        return Err(Error::InvalidParameter("a mixture needs K >= 1 components".into()));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidParameter("logits must be finite".into()));
    }
    Ok(logits.len())
}

fn check_positive<'a>(name: &str, xs: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if xs.into_iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("all {name} entries must be finite and > 0")));
    }
    Ok(())
}

fn check_means(means: &DMatrix<f64>, k: usize) -> Result<usize> {
    if means.nrows() != k {
        return Err(shape_err(format!("means have {} rows, expected K = {k}", means.nrows())));
    }
    if means.ncols() == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if means.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidParameter("means must be finite".into()));
    }
    Ok(means.ncols())
}

/// Components `N(mu_j, sigma)` sharing one diagonal scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedDiagCov {
    logits: DVector<f64>,
    means: DMatrix<f64>,
    scale: DVector<f64>,
    cache: Components,
}

impl SharedDiagCov {
    pub fn new(logits: DVector<f64>, means: DMatrix<f64>, scale: DVector<f64>) -> Result<Self> {
        let k = check_logits(&logits)?;
        let d = check_means(&means, k)?;
        if scale.len() != d {
            return Err(shape_err(format!("scale has length {}, expected D = {d}", scale.len())));
        }
        check_positive("scale", scale.iter())?;
        let scales = DMatrix::from_fn(k, d, |_, i| scale[i]);
        let cache = Components::new(&logits, means.clone(), scales);
        Ok(Self { logits, means, scale, cache })
    }

    pub fn logits(&self) -> &DVector<f64> {
        &self.logits
    }
    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }
    pub fn scale(&self) -> &DVector<f64> {
        &self.scale
    }
}

/// Components `N(0, lambda_j sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroMeanGsm {
    logits: DVector<f64>,
    scale: DVector<f64>,
    multipliers: DVector<f64>,
    cache: Components,
}

impl ZeroMeanGsm {
    pub fn new(logits: DVector<f64>, scale: DVector<f64>, multipliers: DVector<f64>) -> Result<Self> {
        let k = check_logits(&logits)?;
        let d = scale.len();
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if multipliers.len() != k {
            return Err(shape_err(format!("{} multipliers for K = {k}", multipliers.len())));
        }
        check_positive("scale", scale.iter())?;
        check_positive("multiplier", multipliers.iter())?;
        let scales = DMatrix::from_fn(k, d, |j, i| multipliers[j] * scale[i]);
        let cache = Components::new(&logits, DMatrix::zeros(k, d), scales);
        Ok(Self { logits, scale, multipliers, cache })
    }

    pub fn logits(&self) -> &DVector<f64> {
        &self.logits
    }
    pub fn scale(&self) -> &DVector<f64> {
        &self.scale
    }
    pub fn multipliers(&self) -> &DVector<f64> {
        &self.multipliers
    }
}

/// Components `N(mu_j, lambda_j sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gsm {
    logits: DVector<f64>,
    means: DMatrix<f64>,
    scale: DVector<f64>,
    multipliers: DVector<f64>,
    cache: Components,
}

impl Gsm {
    pub fn new(logits: DVector<f64>, means: DMatrix<f64>, scale: DVector<f64>, multipliers: DVector<f64>) -> Result<Self> {
        let k = check_logits(&logits)?;
        let d = check_means(&means, k)?;
        if scale.len() != d {
            return Err(shape_err(format!("scale has length {}, expected D = {d}", scale.len())));
        }
        if multipliers.len() != k {
            return Err(shape_err(format!("{} multipliers for K = {k}", multipliers.len())));
        }
        check_positive("scale", scale.iter())?;
        check_positive("multiplier", multipliers.iter())?;
        let scales = DMatrix::from_fn(k, d, |j, i| multipliers[j] * scale[i]);
        let cache = Components::new(&logits, means.clone(), scales);
        Ok(Self { logits, means, scale, multipliers, cache })
    }

    pub fn logits(&self) -> &DVector<f64> {
        &self.logits
    }
    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }
    pub fn scale(&self) -> &DVector<f64> {
        &self.scale
    }
    pub fn multipliers(&self) -> &DVector<f64> {
        &self.multipliers
    }
}

/// Components `N(mu_j, sigma_j)` with arbitrary diagonal scales.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagNormals {
    logits: DVector<f64>,
    means: DMatrix<f64>,
    scales: DMatrix<f64>,
    cache: Components,
}

impl DiagNormals {
    pub fn new(logits: DVector<f64>, means: DMatrix<f64>, scales: DMatrix<f64>) -> Result<Self> {
        let k = check_logits(&logits)?;
        let d = check_means(&means, k)?;
        if scales.nrows() != k || scales.ncols() != d {
            return Err(shape_err(format!("scales are {}x{}, expected {k}x{d}", scales.nrows(), scales.ncols())));
        }
        check_positive("scale", scales.iter())?;
        let cache = Components::new(&logits, means.clone(), scales.clone());
        Ok(Self { logits, means, scales, cache })
    }

    pub fn logits(&self) -> &DVector<f64> {
        &self.logits
    }
    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }
    pub fn scales(&self) -> &DMatrix<f64> {
        &self.scales
    }
}

/// Tagged union over the supported mixture families.
#[derive(Debug, Clone, PartialEq)]
pub enum MixtureParams {
    SharedDiagCov(SharedDiagCov),
    ZeroMeanGsm(ZeroMeanGsm),
    Gsm(Gsm),
    DiagNormals(DiagNormals),
}

impl From<SharedDiagCov> for MixtureParams {
    fn from(p: SharedDiagCov) -> Self {
        MixtureParams::SharedDiagCov(p)
    }
}
impl From<ZeroMeanGsm> for MixtureParams {
    fn from(p: ZeroMeanGsm) -> Self {
        MixtureParams::ZeroMeanGsm(p)
    }
}
impl From<Gsm> for MixtureParams {
    fn from(p: Gsm) -> Self {
        MixtureParams::Gsm(p)
    }
}
impl From<DiagNormals> for MixtureParams {
    fn from(p: DiagNormals) -> Self {
        MixtureParams::DiagNormals(p)
    }
}

/// Per-point quantities every mixture computation needs.
#[derive(Debug, Clone)]
pub struct ComponentTerms {
    /// `ln pi_j`
    pub log_weights: DVector<f64>,
    /// `ln q_j(z)`
    pub log_components: DVector<f64>,
    /// `ln q(z)`
    pub log_density: f64,
    /// `pi_j q_j(z) / q(z)`
    pub responsibilities: DVector<f64>,
    /// `(z_i - mu_ji) / s_ji`, `K x D`
    pub standardized: DMatrix<f64>,
}

impl MixtureParams {
    fn cache(&self) -> &Components {
        match self {
            MixtureParams::SharedDiagCov(p) => &p.cache,
            MixtureParams::ZeroMeanGsm(p) => &p.cache,
            MixtureParams::Gsm(p) => &p.cache,
            MixtureParams::DiagNormals(p) => &p.cache,
        }
    }

    pub fn family(&self) -> MixtureFamily {
        match self {
            MixtureParams::SharedDiagCov(_) => MixtureFamily::SharedDiagCov,
            MixtureParams::ZeroMeanGsm(_) => MixtureFamily::ZeroMeanGsm,
            MixtureParams::Gsm(_) => MixtureFamily::Gsm,
            MixtureParams::DiagNormals(_) => MixtureFamily::DiagNormals,
        }
    }

    pub fn n_components(&self) -> usize {
        self.logits().len()
    }

    pub fn logits(&self) -> &DVector<f64> {
        match self {
            MixtureParams::SharedDiagCov(p) => &p.logits,
            MixtureParams::ZeroMeanGsm(p) => &p.logits,
            MixtureParams::Gsm(p) => &p.logits,
            MixtureParams::DiagNormals(p) => &p.logits,
        }
    }

    pub fn weights(&self) -> DVector<f64> {
        softmax(self.logits())
    }

    pub fn log_weights(&self) -> &DVector<f64> {
        &self.cache().log_weights
    }

    /// Effective component means, `K x D`.
    pub fn component_means(&self) -> &DMatrix<f64> {
        &self.cache().means
    }

    /// Effective per-dimension component scales, `K x D`.
    pub fn component_scales(&self) -> &DMatrix<f64> {
        &self.cache().scales
    }

    /// `ln q_j(z)` of one component.
    pub fn log_component(&self, j: usize, z: &DVector<f64>) -> f64 {
        let c = self.cache();
        let mut quad = 0.0;
        for i in 0..z.len() {
            let e = (z[i] - c.means[(j, i)]) / c.scales[(j, i)];
            quad += e * e;
        }
        c.log_norm[j] - 0.5 * quad
    }

    pub fn component_terms(&self, z: &DVector<f64>) -> ComponentTerms {
        let c = self.cache();
        let (k, d) = c.means.shape();
        let standardized = DMatrix::from_fn(k, d, |j, i| (z[i] - c.means[(j, i)]) / c.scales[(j, i)]);
        let log_components = DVector::from_fn(k, |j, _| c.log_norm[j] - 0.5 * standardized.row(j).norm_squared());
        let joint: Vec<f64> = (0..k).map(|j| c.log_weights[j] + log_components[j]).collect();
        let log_density = log_sum_exp(&joint);
        let responsibilities = DVector::from_fn(k, |j, _| (joint[j] - log_density).exp());
        ComponentTerms { log_weights: c.log_weights.clone(), log_components, log_density, responsibilities, standardized }
    }

    /// Analytic `d ln q / d logit_j = pi_j (q_j - q) / q`; sums to zero.
    pub fn score_logits(&self, z: &DVector<f64>) -> DVector<f64> {
        let t = self.component_terms(z);
        let pi = self.weights();
        &t.responsibilities - pi
    }

    /// Analytic scores for every non-logit coordinate, in canonical order.
    pub fn score_component_params(&self, z: &DVector<f64>) -> DVector<f64> {
        let t = self.component_terms(z);
        let full = self.score_from_terms(&t);
        full.rows(self.n_components(), full.len() - self.n_components()).into_owned()
    }

    fn score_from_terms(&self, t: &ComponentTerms) -> DVector<f64> {
        let c = self.cache();
        let (k, d) = c.means.shape();
        let r = &t.responsibilities;
        let eps = &t.standardized;
        let pi = softmax(self.logits());
        let mut out: Vec<f64> = (0..k).map(|j| r[j] - pi[j]).collect();
        let mean_score = |out: &mut Vec<f64>| {
            for j in 0..k {
                for i in 0..d {
                    out.push(r[j] * eps[(j, i)] / c.scales[(j, i)]);
                }
            }
        };
        match self {
            MixtureParams::SharedDiagCov(p) => {
                mean_score(&mut out);
                for i in 0..d {
                    let s: f64 = (0..k).map(|j| r[j] * (eps[(j, i)].powi(2) - 1.0)).sum();
                    out.push(s / p.scale[i]);
                }
            }
            MixtureParams::ZeroMeanGsm(p) => {
                for i in 0..d {
                    let s: f64 = (0..k).map(|j| r[j] * (eps[(j, i)].powi(2) - 1.0)).sum();
                    out.push(s / p.scale[i]);
                }
                for j in 0..k {
                    let s: f64 = (0..d).map(|i| eps[(j, i)].powi(2) - 1.0).sum();
                    out.push(r[j] * s / p.multipliers[j]);
                }
            }
            MixtureParams::Gsm(p) => {
                mean_score(&mut out);
                for i in 0..d {
                    let s: f64 = (0..k).map(|j| r[j] * (eps[(j, i)].powi(2) - 1.0)).sum();
                    out.push(s / p.scale[i]);
                }
                for j in 0..k {
                    let s: f64 = (0..d).map(|i| eps[(j, i)].powi(2) - 1.0).sum();
                    out.push(r[j] * s / p.multipliers[j]);
                }
            }
            MixtureParams::DiagNormals(p) => {
                mean_score(&mut out);
                for j in 0..k {
                    for i in 0..d {
                        out.push(r[j] * (eps[(j, i)].powi(2) - 1.0) / p.scales[(j, i)]);
                    }
                }
            }
        }
        DVector::from_vec(out)
    }

    /// Flattened parameter vector in coordinate order.
    pub fn param_vector(&self) -> Vec<f64> {
        self.coordinates().into_iter().map(|c| self.param(c).expect("own coordinate")).collect()
    }

    /// Rebuild from a parameter vector in coordinate order.
    pub fn with_param_vector(&self, values: &[f64]) -> Result<Self> {
        let coords = self.coordinates();
        if coords.len() != values.len() {
            return Err(shape_err(format!("{} values for {} coordinates", values.len(), coords.len())));
        }
        let mut parts = self.raw_parts();
        for (c, v) in coords.into_iter().zip(values) {
            parts.set(c, *v)?;
        }
        parts.build(self.family())
    }

    fn raw_parts(&self) -> RawParts {
        match self {
            MixtureParams::SharedDiagCov(p) => RawParts {
                logits: p.logits.clone(),
                means: Some(p.means.clone()),
                scale: Some(p.scale.clone()),
                scales: None,
                multipliers: None,
            },
            MixtureParams::ZeroMeanGsm(p) => RawParts {
                logits: p.logits.clone(),
                means: None,
                scale: Some(p.scale.clone()),
                scales: None,
                multipliers: Some(p.multipliers.clone()),
            },
            MixtureParams::Gsm(p) => RawParts {
                logits: p.logits.clone(),
                means: Some(p.means.clone()),
                scale: Some(p.scale.clone()),
                scales: None,
                multipliers: Some(p.multipliers.clone()),
            },
            MixtureParams::DiagNormals(p) => RawParts {
                logits: p.logits.clone(),
                means: Some(p.means.clone()),
                scale: None,
                scales: Some(p.scales.clone()),
                multipliers: None,
            },
        }
    }
}

struct RawParts {
    logits: DVector<f64>,
    means: Option<DMatrix<f64>>,
    scale: Option<DVector<f64>>,
    scales: Option<DMatrix<f64>>,
    multipliers: Option<DVector<f64>>,
}

impl RawParts {
    fn get(&self, c: Coordinate) -> Option<f64> {
        match c {
            Coordinate::Logit(j) => self.logits.get(j).copied(),
            Coordinate::CompMean(j, i) => self.means.as_ref().and_then(|m| m.get((j, i)).copied()),
            Coordinate::Scale(i) => self.scale.as_ref().and_then(|s| s.get(i).copied()),
            Coordinate::CompScale(j, i) => self.scales.as_ref().and_then(|s| s.get((j, i)).copied()),
            Coordinate::Multiplier(j) => self.multipliers.as_ref().and_then(|m| m.get(j).copied()),
            _ => None,
        }
    }

    fn set(&mut self, c: Coordinate, v: f64) -> Result<()> {
        let slot = match c {
            Coordinate::Logit(j) => self.logits.get_mut(j),
            Coordinate::CompMean(j, i) => self.means.as_mut().and_then(|m| m.get_mut((j, i))),
            Coordinate::Scale(i) => self.scale.as_mut().and_then(|s| s.get_mut(i)),
            Coordinate::CompScale(j, i) => self.scales.as_mut().and_then(|s| s.get_mut((j, i))),
            Coordinate::Multiplier(j) => self.multipliers.as_mut().and_then(|m| m.get_mut(j)),
            _ => None,
        };
        match slot {
            Some(s) => {
                *s = v;
                Ok(())
            }
            None => Err(Error::InvalidParameter(format!("coordinate {c} not present"))),
        }
    }

    fn build(self, family: MixtureFamily) -> Result<MixtureParams> {
        let missing = || Error::InvalidParameter("missing parameter block".into());
        Ok(match family {
            MixtureFamily::SharedDiagCov => {
                SharedDiagCov::new(self.logits, self.means.ok_or_else(missing)?, self.scale.ok_or_else(missing)?)?.into()
            }
            MixtureFamily::ZeroMeanGsm => {
                ZeroMeanGsm::new(self.logits, self.scale.ok_or_else(missing)?, self.multipliers.ok_or_else(missing)?)?.into()
            }
            MixtureFamily::Gsm => Gsm::new(
                self.logits,
                self.means.ok_or_else(missing)?,
                self.scale.ok_or_else(missing)?,
                self.multipliers.ok_or_else(missing)?,
            )?
            .into(),
            MixtureFamily::DiagNormals => {
                DiagNormals::new(self.logits, self.means.ok_or_else(missing)?, self.scales.ok_or_else(missing)?)?.into()
            }
        })
    }
}

impl Density for MixtureParams {
    fn dim(&self) -> usize {
        self.cache().means.ncols()
    }

    fn log_density(&self, z: &DVector<f64>) -> f64 {
        let k = self.n_components();
        let lw = self.log_weights();
        let joint: Vec<f64> = (0..k).map(|j| lw[j] + self.log_component(j, z)).collect();
        log_sum_exp(&joint)
    }

    fn sample(&self, rng: &mut RngStream) -> Sample {
        let pi = self.weights();
        let j = rng.categorical(pi.as_slice());
        let c = self.cache();
        let d = self.dim();
        let value = DVector::from_fn(d, |i, _| c.means[(j, i)] + c.scales[(j, i)] * rng.normal());
        Sample { value, component_index: Some(j) }
    }

    fn coordinates(&self) -> Vec<Coordinate> {
        let k = self.n_components();
        let d = self.dim();
        let mut out: Vec<Coordinate> = (0..k).map(Coordinate::Logit).collect();
        let means = |out: &mut Vec<Coordinate>| {
            for j in 0..k {
                for i in 0..d {
                    out.push(Coordinate::CompMean(j, i));
                }
            }
        };
        match self.family() {
            MixtureFamily::SharedDiagCov => {
                means(&mut out);
                out.extend((0..d).map(Coordinate::Scale));
            }
            MixtureFamily::ZeroMeanGsm => {
                out.extend((0..d).map(Coordinate::Scale));
                out.extend((0..k).map(Coordinate::Multiplier));
            }
            MixtureFamily::Gsm => {
                means(&mut out);
                out.extend((0..d).map(Coordinate::Scale));
                out.extend((0..k).map(Coordinate::Multiplier));
            }
            MixtureFamily::DiagNormals => {
                means(&mut out);
                for j in 0..k {
                    for i in 0..d {
                        out.push(Coordinate::CompScale(j, i));
                    }
                }
            }
        }
        out
    }

    fn param(&self, coord: Coordinate) -> Result<f64> {
        self.raw_parts().get(coord).ok_or_else(|| Error::InvalidParameter(format!("coordinate {coord} not present")))
    }

    fn with_param(&self, coord: Coordinate, value: f64) -> Result<Self> {
        let mut parts = self.raw_parts();
        parts.set(coord, value)?;
        parts.build(self.family())
    }

    fn score(&self, z: &DVector<f64>) -> DVector<f64> {
        self.score_from_terms(&self.component_terms(z))
    }

    /// `dq/dlogit_j = pi_j (q_j - q)`.
    fn analytic_density_derivative(&self, coord: Coordinate, z: &DVector<f64>) -> Option<f64> {
        match coord {
            Coordinate::Logit(j) if j < self.n_components() => {
                let pi = self.log_weights()[j].exp();
                Some(pi * (self.log_component(j, z).exp() - self.log_density(z).exp()))
            }
            _ => None,
        }
    }

    fn grad_log_density(&self, z: &DVector<f64>) -> DVector<f64> {
        let t = self.component_terms(z);
        let c = self.cache();
        let (k, d) = c.means.shape();
        DVector::from_fn(d, |i, _| -(0..k).map(|j| t.responsibilities[j] * t.standardized[(j, i)] / c.scales[(j, i)]).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_diff, FiniteDiffConfig};

    fn random_family(family: MixtureFamily, k: usize, d: usize, seed: u64) -> MixtureParams {
        let mut rng = RngStream::new(seed, 0);
        let logits = DVector::from_fn(k, |_, _| 0.5 * rng.normal());
        let means = DMatrix::from_fn(k, d, |_, _| rng.normal());
        let scale = DVector::from_fn(d, |_, _| 0.6 + 0.8 * rng.uniform());
        let mults = DVector::from_fn(k, |_, _| 0.5 + rng.uniform());
        let scales = DMatrix::from_fn(k, d, |_, _| 0.5 + rng.uniform());
        match family {
            MixtureFamily::SharedDiagCov => SharedDiagCov::new(logits, means, scale).unwrap().into(),
            MixtureFamily::ZeroMeanGsm => ZeroMeanGsm::new(logits, scale, mults).unwrap().into(),
            MixtureFamily::Gsm => Gsm::new(logits, means, scale, mults).unwrap().into(),
            MixtureFamily::DiagNormals => DiagNormals::new(logits, means, scales).unwrap().into(),
        }
    }

    #[test]
    fn one_dim_densities_integrate_to_one() {
        for family in MixtureFamily::ALL {
            let q = random_family(family, 2, 1, 4);
            let (a, b, n) = (-30.0, 30.0, 60_000);
            let h = (b - a) / n as f64;
            let s: f64 = (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    w * q.density(&DVector::from_vec(vec![a + i as f64 * h]))
                })
                .sum();
            assert!((s * h - 1.0).abs() < 1e-6, "{family:?}: {}", s * h);
        }
    }

    #[test]
    fn scores_match_finite_differences() {
        for family in MixtureFamily::ALL {
            for seed in 0..5 {
                let q = random_family(family, 3, 4, 100 + seed);
                let mut rng = RngStream::new(seed, 9);
                let z = q.sample(&mut rng).value;
                let score = q.score(&z);
                for (idx, c) in q.coordinates().into_iter().enumerate() {
                    let x0 = q.param(c).unwrap();
                    let fd = central_diff(|x| Ok(q.with_param(c, x)?.log_density(&z)), x0, FiniteDiffConfig::default()).unwrap();
                    let tol = 1e-6 * (1.0 + fd.abs());
                    assert!((fd - score[idx]).abs() < tol, "{family:?} {c}: fd {fd} analytic {}", score[idx]);
                }
            }
        }
    }

    #[test]
    fn logit_score_sums_to_zero_and_single_component_is_zero() {
        let q = random_family(MixtureFamily::DiagNormals, 4, 3, 8);
        let z = DVector::from_vec(vec![0.3, -2.0, 1.0]);
        assert!(q.score_logits(&z).sum().abs() < 1e-12);
        let q1 = random_family(MixtureFamily::Gsm, 1, 3, 8);
        assert_eq!(q1.score_logits(&z)[0], 0.0);
    }

    #[test]
    fn single_component_mean_score_is_gaussian() {
        let q: MixtureParams = DiagNormals::new(
            DVector::from_vec(vec![0.0]),
            DMatrix::from_row_slice(1, 2, &[0.5, -1.0]),
            DMatrix::from_row_slice(1, 2, &[2.0, 0.5]),
        )
        .unwrap()
        .into();
        let z = DVector::from_vec(vec![1.0, 1.0]);
        let s = q.score_component_params(&z);
        assert!((s[0] - 0.5 / 4.0).abs() < 1e-15);
        assert!((s[1] - 2.0 / 0.25).abs() < 1e-15);
    }

    #[test]
    fn far_component_has_vanishing_responsibility() {
        let q: MixtureParams = SharedDiagCov::new(
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 60.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap()
        .into();
        let s = q.score(&DVector::from_vec(vec![0.5]));
        // comp_mean[1,0] is the third coordinate
        assert!(s[3].abs() < 1e-300);
        assert!((s[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_scale_sample_hits_component_mean() {
        let q: MixtureParams = DiagNormals::new(
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 4.0]),
            DMatrix::from_element(2, 2, 1e-12),
        )
        .unwrap()
        .into();
        let mut rng = RngStream::new(1, 1);
        for _ in 0..20 {
            let s = q.sample(&mut rng);
            let j = s.component_index.unwrap();
            for i in 0..2 {
                assert!((s.value[i] - q.component_means()[(j, i)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ancestral_frequencies() {
        let q: MixtureParams =
            SharedDiagCov::new(DVector::from_vec(vec![0.0, 2f64.ln(), 3f64.ln()]), DMatrix::zeros(3, 1), DVector::from_vec(vec![1.0]))
                .unwrap()
                .into();
        let n = 120_000;
        let mut counts = [0usize; 3];
        let mut rng = RngStream::new(3, 0);
        for _ in 0..n {
            counts[q.sample(&mut rng).component_index.unwrap()] += 1;
        }
        for (j, p) in [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0].iter().enumerate() {
            let f = counts[j] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn extreme_logits_do_not_overflow() {
        let q: MixtureParams = SharedDiagCov::new(
            DVector::from_vec(vec![500.0, -500.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap()
        .into();
        let v = q.log_density(&DVector::from_vec(vec![0.2]));
        assert!(v.is_finite());
        assert!(q.score(&DVector::from_vec(vec![0.2])).iter().all(|x| x.is_finite()));
    }

    #[test]
    fn param_vector_roundtrip() {
        for family in MixtureFamily::ALL {
            let q = random_family(family, 3, 2, 12);
            let v = q.param_vector();
            assert_eq!(q.with_param_vector(&v).unwrap(), q);
            assert_eq!(v.len(), q.coordinates().len());
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        let l = DVector::from_vec(vec![0.0, 0.0]);
        assert!(SharedDiagCov::new(l.clone(), DMatrix::zeros(2, 2), DVector::from_vec(vec![1.0, 0.0])).is_err());
        assert!(ZeroMeanGsm::new(l.clone(), DVector::from_vec(vec![1.0]), DVector::from_vec(vec![1.0, -1.0])).is_err());
        assert!(DiagNormals::new(l.clone(), DMatrix::zeros(3, 2), DMatrix::from_element(3, 2, 1.0)).is_err());
        assert!(Gsm::new(DVector::zeros(0), DMatrix::zeros(0, 2), DVector::from_vec(vec![1.0, 1.0]), DVector::zeros(0)).is_err());
    }
}
