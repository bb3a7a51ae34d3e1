//! Two-dimensional mixture target with a known normalizer and a stochastic
//! variational inference loop over diagonal-Normal mixtures.

use nalgebra::{DMatrix, DVector};
use pathwise::distributions::{Coordinate, Density, DiagNormals, MixtureParams};
use pathwise::estimators::{gumbel_softmax_grad_with, GumbelConfig, GumbelMode};
use pathwise::fields::{FieldProvider, MixtureFieldOptions, MixtureFields};
use pathwise::numerics::{AdamState, RngStream};

use crate::error::{CliError, CliResult};

/// Unnormalized density `p(z) = exp(log_normalizer) * mixture(z)`.
#[derive(Debug, Clone)]
pub struct ToyTarget {
    mixture: MixtureParams,
    log_normalizer: f64,
}

impl ToyTarget {
    pub fn new(mixture: MixtureParams, log_normalizer: f64) -> CliResult<Self> {
        if !log_normalizer.is_finite() {
            return Err(CliError::Config("log normalizer must be finite".into()));
        }
        Ok(Self { mixture, log_normalizer })
    }

    /// Two well-separated elongated modes with weights 0.35 and 0.65.
    pub fn standard() -> Self {
        let mixture = DiagNormals::new(
            DVector::from_vec(vec![0.35f64.ln(), 0.65f64.ln()]),
            DMatrix::from_row_slice(2, 2, &[-1.5, 0.5, 1.5, -0.5]),
            DMatrix::from_row_slice(2, 2, &[0.6, 0.9, 0.8, 0.5]),
        )
        .expect("valid target")
        .into();
        Self { mixture, log_normalizer: 1.25 }
    }

    pub fn mixture(&self) -> &MixtureParams {
        &self.mixture
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn dim(&self) -> usize {
        self.mixture.dim()
    }

    pub fn log_density(&self, z: &DVector<f64>) -> f64 {
        self.log_normalizer + self.mixture.log_density(z)
    }

    pub fn grad_log_density(&self, z: &DVector<f64>) -> DVector<f64> {
        self.mixture.grad_log_density(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgviEstimator {
    Pathwise,
    Hybrid,
    Score,
    GsSoft,
    GsHard,
}

impl SgviEstimator {
    pub const ALL: [SgviEstimator; 5] =
        [SgviEstimator::Pathwise, SgviEstimator::Hybrid, SgviEstimator::Score, SgviEstimator::GsSoft, SgviEstimator::GsHard];

    pub fn name(self) -> &'static str {
        match self {
            SgviEstimator::Pathwise => "pathwise",
            SgviEstimator::Hybrid => "hybrid",
            SgviEstimator::Score => "score",
            SgviEstimator::GsSoft => "gs-soft",
            SgviEstimator::GsHard => "gs-hard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgviConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub eval_every: usize,
    pub eval_samples: usize,
    pub temperature: f64,
}

impl Default for SgviConfig {
    fn default() -> Self {
        Self { steps: 5000, learning_rate: 0.01, eval_every: 250, eval_samples: 2000, temperature: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgviPoint {
    pub step: usize,
    pub elbo: f64,
    pub kl_to_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgviTrace {
    pub estimator: SgviEstimator,
    pub seed: u64,
    pub points: Vec<SgviPoint>,
    pub final_params: MixtureParams,
}

/// Default starting point: equal weights, modes near the origin, unit scales.
pub fn default_init() -> MixtureParams {
    DiagNormals::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[-0.5, 0.2, 0.5, -0.2]), DMatrix::from_element(2, 2, 1.0))
        .expect("valid init")
        .into()
}

/// Monte Carlo ELBO `E_q[log p(z) - log q(z)]`.
pub fn estimate_elbo(target: &ToyTarget, q: &MixtureParams, n: usize, rng: &mut RngStream) -> f64 {
    (0..n)
        .map(|_| {
            let z = q.sample(rng).value;
            target.log_density(&z) - q.log_density(&z)
        })
        .sum::<f64>()
        / n as f64
}

/// One single-sample estimate of `grad_theta ELBO` in canonical order.
pub fn elbo_gradient(
    target: &ToyTarget,
    q: &MixtureParams,
    estimator: SgviEstimator,
    temperature: f64,
    rng: &mut RngStream,
) -> CliResult<DVector<f64>> {
    let grad_h = |z: &DVector<f64>| target.grad_log_density(z) - q.grad_log_density(z);
    let h = |z: &DVector<f64>| target.log_density(z) - q.log_density(z);
    let out = match estimator {
        SgviEstimator::Pathwise => {
            let z = q.sample(rng).value;
            MixtureFields::new(q.clone(), MixtureFieldOptions::default())?.pathwise(&grad_h(&z), &z)?
        }
        SgviEstimator::Score => {
            let z = q.sample(rng).value;
            q.score(&z) * h(&z)
        }
        SgviEstimator::Hybrid => {
            let z = q.sample(rng).value;
            let k = q.n_components();
            let comp = MixtureFields::components_only(q.clone()).pathwise(&grad_h(&z), &z)?;
            let mut out = DVector::zeros(k + comp.len());
            out.rows_mut(0, k).copy_from(&(q.score_logits(&z) * h(&z)));
            out.rows_mut(k, comp.len()).copy_from(&comp);
            out
        }
        SgviEstimator::GsSoft | SgviEstimator::GsHard => {
            let mode = if estimator == SgviEstimator::GsSoft { GumbelMode::Soft } else { GumbelMode::Hard };
            gumbel_softmax_grad_with(q, grad_h, GumbelConfig::new(temperature, mode)?, rng)?.1
        }
    };
    Ok(out)
}

/// Adam ascent on the ELBO in `(logits, means, ln scales)`.
pub fn run_sgvi(target: &ToyTarget, init: &MixtureParams, estimator: SgviEstimator, cfg: &SgviConfig, seed: u64) -> CliResult<SgviTrace> {
    if init.dim() != target.dim() {
        return Err(CliError::Config("variational family and target differ in dimension".into()));
    }
    if !(cfg.learning_rate > 0.0) || cfg.eval_every == 0 || cfg.eval_samples == 0 {
        return Err(CliError::Config("learning rate, eval_every and eval_samples must be positive".into()));
    }
    let coords = init.coordinates();
    let is_scale: Vec<bool> = coords.iter().map(|c| matches!(c, Coordinate::CompScale(..))).collect();
    let mut u: Vec<f64> = init.param_vector().into_iter().zip(&is_scale).map(|(v, s)| if *s { v.ln() } else { v }).collect();
    let to_params = |u: &[f64]| -> CliResult<MixtureParams> {
        let v: Vec<f64> = u.iter().zip(&is_scale).map(|(x, s)| if *s { x.exp() } else { *x }).collect();
        Ok(init.with_param_vector(&v)?)
    };
    let mut adam = AdamState::new(u.len(), cfg.learning_rate);
    let mut train = RngStream::new(seed, 0);
    let eval_base = RngStream::new(seed, 1);
    let mut q = init.clone();
    let mut points = Vec::new();
    let mut record = |step: usize, q: &MixtureParams| {
        let elbo = estimate_elbo(target, q, cfg.eval_samples, &mut eval_base.derive(step as u64));
        points.push(SgviPoint { step, elbo, kl_to_target: target.log_normalizer() - elbo });
    };
    record(0, &q);
    for step in 1..=cfg.steps {
        let g = elbo_gradient(target, &q, estimator, cfg.temperature, &mut train)?;
        let scale_values = q.param_vector();
        let neg: Vec<f64> = g.iter().zip(&is_scale).zip(&scale_values).map(|((gi, s), v)| if *s { -gi * v } else { -gi }).collect();
        if let Some(i) = neg.iter().position(|x| !x.is_finite()) {
            return Err(pathwise::Error::NonFinite(format!("{} gradient entry {i} at step {step}", estimator.name())).into());
        }
        adam.step(&mut u, &neg)?;
        q = to_params(&u)?;
        if step % cfg.eval_every == 0 || step == cfg.steps {
            record(step, &q);
        }
    }
    Ok(SgviTrace { estimator, seed, points, final_params: q })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_normalizer_is_exact() {
        let t = ToyTarget::standard();
        let mut rng = RngStream::new(1, 0);
        let elbo = estimate_elbo(&t, t.mixture(), 100, &mut rng);
        assert!((elbo - t.log_normalizer()).abs() < 1e-12);
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in SgviEstimator::ALL {
            assert_eq!(SgviEstimator::parse(e.name()), Some(e));
        }
        assert_eq!(SgviEstimator::parse("rt"), None);
    }

    #[test]
    fn pathwise_parts_vanish_at_the_target() {
        let t = ToyTarget::standard();
        let mut rng = RngStream::new(2, 0);
        let g = elbo_gradient(&t, t.mixture(), SgviEstimator::Pathwise, 0.5, &mut rng).unwrap();
        assert!(g.amax() < 1e-10);
        let g = elbo_gradient(&t, t.mixture(), SgviEstimator::Hybrid, 0.5, &mut rng).unwrap();
        assert!(g.rows(2, g.len() - 2).amax() < 1e-10);
    }
}
