use nalgebra::{DMatrix, DVector};

use super::geometry::MixtureGeometry;
use super::{FieldProvider, VelocityFieldSet};
use crate::distributions::{ComponentTerms, Coordinate, Density, MixtureFamily, MixtureParams};
use crate::error::{shape_err, Error, Result};
use crate::numerics::special::{ln_radial_cdf, ln_std_normal_cdf_diff};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Common reference mean of the telescopic diagonal-Normal fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ReferenceMean {
    /// Unweighted average of the component means.
    #[default]
    Centroid,
    /// Mixture mean `sum_j pi_j mu_j`.
    WeightedCentroid,
    Fixed(DVector<f64>),
}

/// Knobs of the diagonal-Normal logit fields. The reference scale is always
/// `sigma0_i = min_j sigma_ji`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixtureFieldOptions {
    pub reference_mean: ReferenceMean,
    /// Order in which dimensions are telescoped; `None` means `0..D`.
    pub dimension_order: Option<Vec<usize>>,
}

fn check_point(params: &MixtureParams, z: &DVector<f64>) -> Result<()> {
    if z.len() != params.dim() {
        return Err(shape_err(format!("point has length {}, D = {}", z.len(), params.dim())));
    }
    Ok(())
}

fn wrong_family(expected: MixtureFamily, got: MixtureFamily) -> Error {
    Error::InvalidParameter(format!("expected a {} mixture, got {}", expected.name(), got.name()))
}

pub(super) fn logit_labels(k: usize) -> Vec<Coordinate> {
    (0..k).map(Coordinate::Logit).collect()
}

/// `v_j = pi_j (u_j - sum_k pi_k u_k)` applied column-wise.
pub(super) fn center_and_weight(mut u: DMatrix<f64>, pi: &DVector<f64>) -> DMatrix<f64> {
    let mean = &u * pi;
    for j in 0..u.ncols() {
        let mut col = u.column_mut(j);
        col -= &mean;
        col *= pi[j];
    }
    u
}

/// Pairwise field for components `N(mu_j, diag(scale^2))` and `N(mu_k, ...)`
/// satisfying `div(q v) = q_k - q_j`; zero for coincident means.
fn pair_field(geo: &MixtureGeometry, scale: &DVector<f64>, ln_prefactor: f64, ln_q: f64, j: usize, k: usize) -> Option<DVector<f64>> {
    let u = geo.direction(j, k)?;
    let b = geo.z_par[(j, k)] - geo.mu_par[(j, k)];
    let a = b + geo.gap[(j, k)];
    let (sign, ln_diff) = ln_std_normal_cdf_diff(a, b);
    let mag = sign * (ln_prefactor - 0.5 * geo.perp_dist_sq[(j, k)] + ln_diff - ln_q).exp();
    Some(scale.component_mul(u) * mag)
}

fn pair_prefactor(scale: &DVector<f64>) -> f64 {
    -0.5 * (scale.len() as f64 - 1.0) * LN_2PI - scale.iter().map(|s| s.ln()).sum::<f64>()
}

/// Column `j` holds `sum_{k != j} pi_k v^{jk}`.
fn pairwise_sums(means: &DMatrix<f64>, scale: &DVector<f64>, pi: &DVector<f64>, ln_q: f64, z: &DVector<f64>) -> DMatrix<f64> {
    let k = means.nrows();
    let mut out = DMatrix::zeros(z.len(), k);
    if k < 2 {
        return out;
    }
    let geo = MixtureGeometry::new(z, means, scale);
    let ln_pref = pair_prefactor(scale);
    for j in 0..k {
        for kk in j + 1..k {
            if let Some(v) = pair_field(&geo, scale, ln_pref, ln_q, j, kk) {
                out.column_mut(j).axpy(pi[kk], &v, 1.0);
                out.column_mut(kk).axpy(-pi[j], &v, 1.0);
            }
        }
    }
    out
}

/// `q(z) F_lambda(z - center) / q(z)` where `F_lambda` is the radial flux of
/// `N(center, lambda^2 diag(scale^2))` with unit point source at the center.
fn radial_field(x: &DVector<f64>, scale: &DVector<f64>, lambda: f64, ln_q: f64) -> Result<DVector<f64>> {
    let d = x.len();
    let xt = x.component_div(scale);
    let r = xt.norm();
    if r == 0.0 {
        return Ok(DVector::zeros(d));
    }
    let ln_scale: f64 = scale.iter().map(|s| s.ln()).sum();
    let ln_mag = ln_radial_cdf(r / lambda, d)? - (d as f64 - 1.0) * lambda.ln() - ln_scale - ln_q;
    Ok(scale.component_mul(&xt) * (ln_mag.exp() / r))
}

/// Logit fields of the shared-diagonal-covariance family.
pub fn logit_fields_shared_cov(params: &MixtureParams, z: &DVector<f64>) -> Result<VelocityFieldSet> {
    check_point(params, z)?;
    let MixtureParams::SharedDiagCov(p) = params else {
        return Err(wrong_family(MixtureFamily::SharedDiagCov, params.family()));
    };
    let terms = params.component_terms(z);
    let pi = params.weights();
    let mut u = pairwise_sums(p.means(), p.scale(), &pi, terms.log_density, z);
    for j in 0..u.ncols() {
        u.column_mut(j).scale_mut(pi[j]);
    }
    VelocityFieldSet::new(logit_labels(pi.len()), u)
}

/// The single pairwise field `v^{jk}` (shared-cov family, or the mean part
/// of the scale-mixture family at the reference multiplier).
pub fn pairwise_field(params: &MixtureParams, j: usize, k: usize, z: &DVector<f64>) -> Result<DVector<f64>> {
    check_point(params, z)?;
    let kk = params.n_components();
    if j >= kk || k >= kk {
        return Err(Error::InvalidParameter(format!("component index out of range for K = {kk}")));
    }
    let ln_q = params.log_density(z);
    let (means, scale, extra) = match params {
        MixtureParams::SharedDiagCov(p) => (p.means(), p.scale().clone(), None),
        MixtureParams::Gsm(p) => {
            let lambda0 = p.multipliers().min();
            (p.means(), p.scale() * lambda0, Some((p, lambda0)))
        }
        other => return Err(wrong_family(MixtureFamily::SharedDiagCov, other.family())),
    };
    if j == k {
        return Ok(DVector::zeros(z.len()));
    }
    let geo = MixtureGeometry::new(z, means, &scale);
    let mut v = pair_field(&geo, &scale, pair_prefactor(&scale), ln_q, j, k).unwrap_or_else(|| DVector::zeros(z.len()));
    if let Some((p, lambda0)) = extra {
        v += gsm_dilation(p.means(), p.scale(), p.multipliers(), lambda0, ln_q, z, j)?;
        v -= gsm_dilation(p.means(), p.scale(), p.multipliers(), lambda0, ln_q, z, k)?;
    }
    Ok(v)
}

/// Logit fields of the zero-mean scale mixture; zero at the origin.
pub fn logit_fields_zero_mean_gsm(params: &MixtureParams, z: &DVector<f64>) -> Result<VelocityFieldSet> {
    check_point(params, z)?;
    let MixtureParams::ZeroMeanGsm(p) = params else {
        return Err(wrong_family(MixtureFamily::ZeroMeanGsm, params.family()));
    };
    let ln_q = params.log_density(z);
    let pi = params.weights();
    let k = pi.len();
    let mut u = DMatrix::zeros(z.len(), k);
    for j in 0..k {
        u.set_column(j, &radial_field(z, p.scale(), p.multipliers()[j], ln_q)?);
    }
    VelocityFieldSet::new(logit_labels(k), center_and_weight(u, &pi))
}

/// Radial transport from `N(mu_j, lambda_j sigma)` to `N(mu_j, lambda0 sigma)`.
fn gsm_dilation(
    means: &DMatrix<f64>,
    scale: &DVector<f64>,
    multipliers: &DVector<f64>,
    lambda0: f64,
    ln_q: f64,
    z: &DVector<f64>,
    j: usize,
) -> Result<DVector<f64>> {
    if multipliers[j] == lambda0 {
        return Ok(DVector::zeros(z.len()));
    }
    let x = z - means.row(j).transpose();
    Ok(radial_field(&x, scale, multipliers[j], ln_q)? - radial_field(&x, scale, lambda0, ln_q)?)
}

/// Logit fields of the general scale mixture: pairwise mean transport at the
/// reference multiplier `lambda0 = min_j lambda_j` plus per-component dilations.
pub fn logit_fields_gsm(params: &MixtureParams, z: &DVector<f64>) -> Result<VelocityFieldSet> {
    check_point(params, z)?;
    let MixtureParams::Gsm(p) = params else {
        return Err(wrong_family(MixtureFamily::Gsm, params.family()));
    };
    let ln_q = params.log_density(z);
    let pi = params.weights();
    let k = pi.len();
    let lambda0 = p.multipliers().min();
    let base_scale = p.scale() * lambda0;
    let pair = pairwise_sums(p.means(), &base_scale, &pi, ln_q, z);
    let mut w = DMatrix::zeros(z.len(), k);
    for j in 0..k {
        w.set_column(j, &gsm_dilation(p.means(), p.scale(), p.multipliers(), lambda0, ln_q, z, j)?);
    }
    let mut out = center_and_weight(w, &pi);
    for j in 0..k {
        out.column_mut(j).axpy(pi[j], &pair.column(j), 1.0);
    }
    VelocityFieldSet::new(logit_labels(k), out)
}

fn dimension_order(opts: &MixtureFieldOptions, d: usize) -> Result<Vec<usize>> {
    match &opts.dimension_order {
        None => Ok((0..d).collect()),
        Some(order) => {
            let mut seen = vec![false; d];
            if order.len() != d {
                return Err(shape_err(format!("dimension order has length {}, D = {d}", order.len())));
            }
            for &i in order {
                if i >= d || seen[i] {
                    return Err(Error::InvalidParameter("dimension order must be a permutation of 0..D".into()));
                }
                seen[i] = true;
            }
            Ok(order.clone())
        }
    }
}

fn reference_mean(params: &MixtureParams, opts: &MixtureFieldOptions) -> Result<DVector<f64>> {
    let means = params.component_means();
    let k = means.nrows();
    match &opts.reference_mean {
        ReferenceMean::Centroid => Ok(means.row_sum().transpose() / k as f64),
        ReferenceMean::WeightedCentroid => Ok(means.tr_mul(&params.weights())),
        ReferenceMean::Fixed(m) => {
            if m.len() != params.dim() {
                return Err(shape_err(format!("reference mean has length {}, D = {}", m.len(), params.dim())));
            }
            Ok(m.clone())
        }
    }
}

/// Telescopic logit fields of the diagonal-Normal family. Each component is
/// transported one dimension at a time to a common reference
/// `N(mu0, diag(sigma0^2))`.
pub fn logit_fields_diag_normals(params: &MixtureParams, z: &DVector<f64>, opts: &MixtureFieldOptions) -> Result<VelocityFieldSet> {
    check_point(params, z)?;
    if params.family() != MixtureFamily::DiagNormals {
        return Err(wrong_family(MixtureFamily::DiagNormals, params.family()));
    }
    let terms = params.component_terms(z);
    let u = telescopic(params, &terms, z, opts)?;
    VelocityFieldSet::new(logit_labels(params.n_components()), center_and_weight(u, &params.weights()))
}

fn telescopic(params: &MixtureParams, terms: &ComponentTerms, z: &DVector<f64>, opts: &MixtureFieldOptions) -> Result<DMatrix<f64>> {
    let d = z.len();
    let k = params.n_components();
    let order = dimension_order(opts, d)?;
    let mu0 = reference_mean(params, opts)?;
    let scales = params.component_scales();
    let sigma0 = DVector::from_fn(d, |i, _| scales.column(i).min());
    let zbar = (z - &mu0).component_div(&sigma0);
    // sum over positions after p of the reference log-factors
    let mut after = vec![0.0; d + 1];
    for p in (0..d).rev() {
        let i = order[p];
        after[p] = after[p + 1] + 0.5 * zbar[i] * zbar[i] + sigma0[i].ln();
    }
    let ln_pref = -0.5 * (d as f64 - 1.0) * LN_2PI;
    let ln_q = terms.log_density;
    let mut u = DMatrix::zeros(d, k);
    for j in 0..k {
        let mut before = 0.0;
        for (p, &i) in order.iter().enumerate() {
            let eps = terms.standardized[(j, i)];
            let (sign, ln_diff) = ln_std_normal_cdf_diff(eps, zbar[i]);
            let ln_h = ln_pref + ln_diff - before - after[p + 1];
            u[(i, j)] = -sign * (ln_h - ln_q).exp();
            before += 0.5 * eps * eps + scales[(j, i)].ln();
        }
    }
    Ok(u)
}

/// Logit fields for any family, dispatched on the variant.
pub fn logit_fields(params: &MixtureParams, z: &DVector<f64>, opts: &MixtureFieldOptions) -> Result<VelocityFieldSet> {
    match params.family() {
        MixtureFamily::SharedDiagCov => logit_fields_shared_cov(params, z),
        MixtureFamily::ZeroMeanGsm => logit_fields_zero_mean_gsm(params, z),
        MixtureFamily::Gsm => logit_fields_gsm(params, z),
        MixtureFamily::DiagNormals => logit_fields_diag_normals(params, z, opts),
    }
}

fn component_coordinates(params: &MixtureParams) -> Vec<Coordinate> {
    params.coordinates().into_iter().filter(|c| !c.is_logit()).collect()
}

/// Responsibility-weighted single-component reparameterization fields for
/// every non-logit coordinate.
pub fn component_fields(params: &MixtureParams, z: &DVector<f64>) -> Result<VelocityFieldSet> {
    check_point(params, z)?;
    let terms = params.component_terms(z);
    let coords = component_coordinates(params);
    let d = z.len();
    let r = &terms.responsibilities;
    let means = params.component_means();
    let mut values = DMatrix::zeros(d, coords.len());
    for (col, c) in coords.iter().enumerate() {
        match *c {
            Coordinate::CompMean(j, i) => values[(i, col)] = r[j],
            Coordinate::CompScale(j, i) => values[(i, col)] = r[j] * terms.standardized[(j, i)],
            Coordinate::Scale(i) => {
                let sigma = shared_scale(params)[i];
                values[(i, col)] = (0..r.len()).map(|j| r[j] * (z[i] - means[(j, i)])).sum::<f64>() / sigma;
            }
            Coordinate::Multiplier(j) => {
                let lambda = multipliers(params)[j];
                for i in 0..d {
                    values[(i, col)] = r[j] * (z[i] - means[(j, i)]) / lambda;
                }
            }
            _ => unreachable!("mixtures have no elliptical coordinates"),
        }
    }
    VelocityFieldSet::new(coords, values)
}

fn shared_scale(params: &MixtureParams) -> &DVector<f64> {
    match params {
        MixtureParams::SharedDiagCov(p) => p.scale(),
        MixtureParams::ZeroMeanGsm(p) => p.scale(),
        MixtureParams::Gsm(p) => p.scale(),
        MixtureParams::DiagNormals(_) => unreachable!("diagonal Normals have per-component scales"),
    }
}

fn multipliers(params: &MixtureParams) -> &DVector<f64> {
    match params {
        MixtureParams::ZeroMeanGsm(p) => p.multipliers(),
        MixtureParams::Gsm(p) => p.multipliers(),
        _ => unreachable!("family has no multipliers"),
    }
}

/// All coordinates of a mixture: transport logit fields (optional) followed
/// by component fields.
#[derive(Debug, Clone)]
pub struct MixtureFields {
    params: MixtureParams,
    options: MixtureFieldOptions,
    include_logits: bool,
}

impl MixtureFields {
    pub fn new(params: MixtureParams, options: MixtureFieldOptions) -> Result<Self> {
        dimension_order(&options, params.dim())?;
        reference_mean(&params, &options)?;
        Ok(Self { params, options, include_logits: true })
    }

    /// Component coordinates only (the pathwise half of the hybrid estimator).
    pub fn components_only(params: MixtureParams) -> Self {
        Self { params, options: MixtureFieldOptions::default(), include_logits: false }
    }

    pub fn params(&self) -> &MixtureParams {
        &self.params
    }
}

impl FieldProvider for MixtureFields {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn coordinates(&self) -> Vec<Coordinate> {
        if self.include_logits {
            self.params.coordinates()
        } else {
            component_coordinates(&self.params)
        }
    }

    fn fields(&self, z: &DVector<f64>) -> Result<VelocityFieldSet> {
        let comp = component_fields(&self.params, z)?;
        if self.include_logits {
            logit_fields(&self.params, z, &self.options)?.concat(comp)
        } else {
            Ok(comp)
        }
    }

    fn pathwise(&self, grad_f: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_point(&self.params, z)?;
        if grad_f.len() != z.len() {
            return Err(shape_err("gradient and point differ in length"));
        }
        let params = &self.params;
        let terms = params.component_terms(z);
        let r = &terms.responsibilities;
        let means = params.component_means();
        let d = z.len();
        let mut out = Vec::with_capacity(params.coordinates().len());
        if self.include_logits {
            out.extend(logit_fields(params, z, &self.options)?.dot(grad_f)?.iter());
        }
        for c in component_coordinates(params) {
            let v = match c {
                Coordinate::CompMean(j, i) => r[j] * grad_f[i],
                Coordinate::CompScale(j, i) => r[j] * grad_f[i] * terms.standardized[(j, i)],
                Coordinate::Scale(i) => {
                    grad_f[i] * (0..r.len()).map(|j| r[j] * (z[i] - means[(j, i)])).sum::<f64>() / shared_scale(params)[i]
                }
                Coordinate::Multiplier(j) => {
                    r[j] * (0..d).map(|i| grad_f[i] * (z[i] - means[(j, i)])).sum::<f64>() / multipliers(params)[j]
                }
                _ => unreachable!("mixtures have no elliptical coordinates"),
            };
            out.push(v);
        }
        Ok(DVector::from_vec(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{DiagNormals, Gsm, SharedDiagCov, ZeroMeanGsm};
    use crate::numerics::RngStream;

    fn rand_vec(n: usize, lo: f64, hi: f64, rng: &mut RngStream) -> DVector<f64> {
        DVector::from_fn(n, |_, _| lo + (hi - lo) * rng.uniform())
    }

    fn rand_mat(k: usize, d: usize, rng: &mut RngStream) -> DMatrix<f64> {
        DMatrix::from_fn(k, d, |_, _| rng.normal())
    }

    #[test]
    fn single_component_fields_are_reparameterization_fields() {
        let q: MixtureParams = DiagNormals::new(
            DVector::from_vec(vec![0.3]),
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            DMatrix::from_row_slice(1, 2, &[2.0, 0.5]),
        )
        .unwrap()
        .into();
        let z = DVector::from_vec(vec![2.0, 0.0]);
        let set = component_fields(&q, &z).unwrap();
        assert_eq!(set.field(Coordinate::CompMean(0, 1)).unwrap().as_slice(), &[0.0, 1.0]);
        assert_eq!(set.field(Coordinate::CompScale(0, 0)).unwrap().as_slice(), &[0.5, 0.0]);
        assert_eq!(set.field(Coordinate::CompScale(0, 1)).unwrap().as_slice(), &[0.0, 2.0]);
        let logits = logit_fields(&q, &z, &MixtureFieldOptions::default()).unwrap();
        assert_eq!(logits.values().amax(), 0.0);
    }

    #[test]
    fn identical_components_split_fields_in_half() {
        let q: MixtureParams = Gsm::new(
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]),
            DVector::from_vec(vec![1.0, 3.0]),
            DVector::from_vec(vec![1.5, 1.5]),
        )
        .unwrap()
        .into();
        let z = DVector::from_vec(vec![0.2, -0.4]);
        let set = component_fields(&q, &z).unwrap();
        let expected = (&z - DVector::from_vec(vec![1.0, 2.0])) / 1.5 * 0.5;
        assert!((set.field(Coordinate::Multiplier(1)).unwrap() - expected).amax() < 1e-15);
        assert_eq!(logit_fields_gsm(&q, &z).unwrap().values().amax(), 0.0);
    }

    #[test]
    fn identical_means_give_zero_shared_cov_fields() {
        let q: MixtureParams = SharedDiagCov::new(
            DVector::from_vec(vec![0.0, 1.0, -1.0]),
            DMatrix::from_element(3, 2, 0.5),
            DVector::from_vec(vec![1.0, 2.0]),
        )
        .unwrap()
        .into();
        let set = logit_fields_shared_cov(&q, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(set.values().amax(), 0.0);
    }

    #[test]
    fn logit_fields_sum_to_zero() {
        let mut rng = RngStream::new(11, 0);
        let (k, d) = (4, 3);
        let families: Vec<MixtureParams> = vec![
            SharedDiagCov::new(rand_vec(k, -1.0, 1.0, &mut rng), rand_mat(k, d, &mut rng), rand_vec(d, 0.5, 1.5, &mut rng)).unwrap().into(),
            ZeroMeanGsm::new(rand_vec(k, -1.0, 1.0, &mut rng), rand_vec(d, 0.5, 1.5, &mut rng), rand_vec(k, 0.5, 2.0, &mut rng))
                .unwrap()
                .into(),
            Gsm::new(
                rand_vec(k, -1.0, 1.0, &mut rng),
                rand_mat(k, d, &mut rng),
                rand_vec(d, 0.5, 1.5, &mut rng),
                rand_vec(k, 0.5, 2.0, &mut rng),
            )
            .unwrap()
            .into(),
            DiagNormals::new(
                rand_vec(k, -1.0, 1.0, &mut rng),
                rand_mat(k, d, &mut rng),
                DMatrix::from_fn(k, d, |_, _| 0.5 + rng.uniform()),
            )
            .unwrap()
            .into(),
        ];
        for q in families {
            for _ in 0..20 {
                let z = q.sample(&mut rng).value;
                let set = logit_fields(&q, &z, &MixtureFieldOptions::default()).unwrap();
                let total = set.values().column_sum();
                assert!(total.amax() < 1e-12, "{:?}: {}", q.family(), total.amax());
            }
        }
    }

    #[test]
    fn zero_mean_gsm_vanishes_at_origin_and_for_equal_multipliers() {
        let q: MixtureParams =
            ZeroMeanGsm::new(DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![1.0, 3.0]))
                .unwrap()
                .into();
        assert_eq!(logit_fields_zero_mean_gsm(&q, &DVector::zeros(2)).unwrap().values().amax(), 0.0);
        let q: MixtureParams =
            ZeroMeanGsm::new(DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![2.0, 2.0]))
                .unwrap()
                .into();
        assert_eq!(logit_fields_zero_mean_gsm(&q, &DVector::from_vec(vec![0.5, 1.0])).unwrap().values().amax(), 0.0);
    }

    #[test]
    fn diag_normals_match_shared_cov_in_one_dimension() {
        let logits = DVector::from_vec(vec![0.3, -0.2]);
        let means = DMatrix::from_row_slice(2, 1, &[-0.5, 1.2]);
        let shared: MixtureParams = SharedDiagCov::new(logits.clone(), means.clone(), DVector::from_vec(vec![0.8])).unwrap().into();
        let diag: MixtureParams = DiagNormals::new(logits, means, DMatrix::from_element(2, 1, 0.8)).unwrap().into();
        for x in [-3.0, -0.4, 0.0, 0.9, 2.5] {
            let z = DVector::from_vec(vec![x]);
            let a = logit_fields_shared_cov(&shared, &z).unwrap();
            let b = logit_fields_diag_normals(&diag, &z, &MixtureFieldOptions::default()).unwrap();
            assert!((a.values() - b.values()).amax() < 1e-10);
        }
    }

    #[test]
    fn gsm_reductions() {
        let mut rng = RngStream::new(12, 0);
        let (k, d) = (3, 3);
        let logits = rand_vec(k, -1.0, 1.0, &mut rng);
        let means = rand_mat(k, d, &mut rng);
        let scale = rand_vec(d, 0.5, 1.5, &mut rng);
        let lambda = 0.7;
        let gsm: MixtureParams = Gsm::new(logits.clone(), means.clone(), scale.clone(), DVector::from_element(k, lambda)).unwrap().into();
        let shared: MixtureParams = SharedDiagCov::new(logits.clone(), means, &scale * lambda).unwrap().into();
        let mults = rand_vec(k, 0.5, 2.0, &mut rng);
        let gsm0: MixtureParams = Gsm::new(logits.clone(), DMatrix::zeros(k, d), scale.clone(), mults.clone()).unwrap().into();
        let zm: MixtureParams = ZeroMeanGsm::new(logits, scale, mults).unwrap().into();
        for _ in 0..10 {
            let z = gsm.sample(&mut rng).value;
            let a = logit_fields_gsm(&gsm, &z).unwrap();
            let b = logit_fields_shared_cov(&shared, &z).unwrap();
            assert!((a.values() - b.values()).amax() < 1e-10);
            let z = zm.sample(&mut rng).value;
            let a = logit_fields_gsm(&gsm0, &z).unwrap();
            let b = logit_fields_zero_mean_gsm(&zm, &z).unwrap();
            assert!((a.values() - b.values()).amax() < 1e-10);
        }
    }

    #[test]
    fn pairwise_fields_are_antisymmetric() {
        let mut rng = RngStream::new(13, 0);
        let (k, d) = (3, 4);
        let shared: MixtureParams =
            SharedDiagCov::new(rand_vec(k, -1.0, 1.0, &mut rng), rand_mat(k, d, &mut rng), rand_vec(d, 0.5, 1.5, &mut rng)).unwrap().into();
        let gsm: MixtureParams = Gsm::new(
            rand_vec(k, -1.0, 1.0, &mut rng),
            rand_mat(k, d, &mut rng),
            rand_vec(d, 0.5, 1.5, &mut rng),
            rand_vec(k, 0.5, 2.0, &mut rng),
        )
        .unwrap()
        .into();
        for q in [shared, gsm] {
            let z = q.sample(&mut rng).value;
            for j in 0..k {
                for kk in 0..k {
                    let a = pairwise_field(&q, j, kk, &z).unwrap();
                    let b = pairwise_field(&q, kk, j, &z).unwrap();
                    assert!((a + b).amax() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fast_pathwise_matches_full_fields() {
        let mut rng = RngStream::new(14, 0);
        let (k, d) = (3, 2);
        let q: MixtureParams = Gsm::new(
            rand_vec(k, -1.0, 1.0, &mut rng),
            rand_mat(k, d, &mut rng),
            rand_vec(d, 0.5, 1.5, &mut rng),
            rand_vec(k, 0.5, 2.0, &mut rng),
        )
        .unwrap()
        .into();
        for prov in [MixtureFields::new(q.clone(), MixtureFieldOptions::default()).unwrap(), MixtureFields::components_only(q.clone())] {
            let z = q.sample(&mut rng).value;
            let g = DVector::from_fn(d, |_, _| rng.normal());
            let fast = prov.pathwise(&g, &z).unwrap();
            let slow = prov.fields(&z).unwrap().dot(&g).unwrap();
            assert_eq!(prov.coordinates(), prov.fields(&z).unwrap().coordinates());
            assert!((fast - slow).amax() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_dimension_order() {
        let q: MixtureParams =
            DiagNormals::new(DVector::from_vec(vec![0.0, 0.0]), DMatrix::zeros(2, 2), DMatrix::from_element(2, 2, 1.0)).unwrap().into();
        let opts = MixtureFieldOptions { dimension_order: Some(vec![0, 0]), ..Default::default() };
        assert!(MixtureFields::new(q, opts).is_err());
    }
}
