//! Joint optimization of distribution parameters and the AVF null-field
//! parameters by descending the per-sample squared-gradient surrogate.

use nalgebra::{DMatrix, DVector};

use crate::distributions::{Density, MultivariateNormalParams};
use crate::error::{shape_err, Error, Result};
use crate::estimators::TestFunction;
use crate::fields::{AvfParams, EllipticalFields, FieldProvider};
use crate::montecarlo::{run_chunked, Execution, Moments, DEFAULT_CHUNK_SIZE};
use crate::numerics::{AdamState, RngStream};

/// Gradient of `sum_p (grad f . v^{theta_p})^2` with respect to `B` and `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGradient {
    pub b_grad: DMatrix<f64>,
    pub c_grad: DMatrix<f64>,
    /// The surrogate itself at this sample.
    pub surrogate: f64,
}

/// Exact `lambda`-gradient of the squared pathwise estimate at one point.
///
/// With `g_ab = g_a w_b + s_ab n_ab` and `n_ab = u_a w_b - u_b w_a`,
/// `dS/ds_ab = 2 g_ab n_ab`, `ds_ab/dB[l, a] = C[l, b]` and
/// `ds_ab/dC[l, b] = B[l, a]`.
pub fn variance_grad_lambda(
    params: &MultivariateNormalParams,
    avf: &AvfParams,
    f: &TestFunction,
    z: &DVector<f64>,
) -> Result<LambdaGradient> {
    let d = params.dim();
    if avf.dim() != d || f.dim() != d {
        return Err(shape_err(format!("AVF D = {}, f D = {}, distribution D = {d}", avf.dim(), f.dim())));
    }
    let fields = EllipticalFields::from_mvn(params, Some(avf.clone()))?;
    let grad_f = f.gradient(z);
    let (base, null) = fields.chol_projections(&grad_f, z)?;
    let mut surrogate = grad_f.norm_squared();
    let mut ds = DMatrix::zeros(d, d);
    let mut k = 0;
    for a in 0..d {
        for b in 0..=a {
            let s = if a == b { 0.0 } else { avf.s(a, b) };
            let g = base[k] + s * null[k];
            surrogate += g * g;
            if a != b {
                ds[(a, b)] = 2.0 * g * null[k];
            }
            k += 1;
        }
    }
    Ok(LambdaGradient { b_grad: avf.c_matrix() * ds.transpose(), c_grad: avf.b_matrix() * ds, surrogate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvfOptimizerConfig {
    /// Zero freezes `theta`.
    pub step_size_theta: f64,
    /// Zero freezes `lambda`.
    pub step_size_lambda: f64,
    pub n_steps: usize,
    pub samples_per_step: usize,
    pub rank: usize,
    pub theta_rule: StepRule,
    pub lambda_rule: StepRule,
    /// Record `(theta, lambda)` every this many steps; zero records only the
    /// initial and final states.
    pub snapshot_every: usize,
}

impl AvfOptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta", self.step_size_theta), ("lambda", self.step_size_lambda)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} step size must be finite and >= 0, got {v}")));
            }
        }
        if self.n_steps == 0 || self.samples_per_step == 0 || self.rank == 0 {
            return Err(Error::InvalidParameter("steps, samples per step and rank must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for AvfOptimizerConfig {
    fn default() -> Self {
        Self {
            step_size_theta: 0.0,
            step_size_lambda: 0.01,
            n_steps: 2000,
            samples_per_step: 1,
            rank: 1,
            theta_rule: StepRule::Adam,
            lambda_rule: StepRule::Adam,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvfStep {
    pub step: usize,
    /// Mean over the step's samples of `sum_p (grad f . v^{theta_p})^2`.
    pub surrogate: f64,
    pub theta_norm: f64,
    pub lambda_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvfSnapshot {
    pub step: usize,
    pub params: MultivariateNormalParams,
    pub avf: AvfParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvfTrajectory {
    pub steps: Vec<AvfStep>,
    pub snapshots: Vec<AvfSnapshot>,
    pub final_params: MultivariateNormalParams,
    pub final_avf: AvfParams,
}

fn theta_vec(p: &MultivariateNormalParams) -> Vec<f64> {
    p.coordinates().into_iter().map(|c| p.param(c).expect("own coordinate")).collect()
}

fn theta_from_vec(template: &MultivariateNormalParams, v: &[f64]) -> Result<MultivariateNormalParams> {
    let d = template.dim();
    let mean = DVector::from_column_slice(&v[..d]);
    let mut chol = DMatrix::zeros(d, d);
    let mut k = d;
    for a in 0..d {
        for b in 0..=a {
            chol[(a, b)] = v[k];
            k += 1;
        }
    }
    MultivariateNormalParams::new(mean, chol)
}

struct Updater {
    rule: StepRule,
    step_size: f64,
    adam: Option<AdamState>,
}

impl Updater {
    fn new(rule: StepRule, step_size: f64, n: usize) -> Self {
        let adam = (rule == StepRule::Adam && step_size > 0.0).then(|| AdamState::new(n, step_size));
        Self { rule, step_size, adam }
    }

    fn descend(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if self.step_size == 0.0 {
            return Ok(());
        }
        match (self.rule, self.adam.as_mut()) {
            (StepRule::Adam, Some(adam)) => adam.step(params, grad),
            _ => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.step_size * g;
                }
                Ok(())
            }
        }
    }
}

fn check_finite(v: &[f64], what: &str, step: usize) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what} entry {i} at step {step}"))),
        None => Ok(()),
    }
}

/// Stochastic descent of `E_q[f]` in `theta` and of the squared-gradient
/// surrogate in `lambda`, one fresh batch of samples per step.
pub fn avf_optimize(
    params_init: &MultivariateNormalParams,
    avf_init: &AvfParams,
    f: &TestFunction,
    cfg: &AvfOptimizerConfig,
    rng: &mut RngStream,
) -> Result<AvfTrajectory> {
    cfg.validate()?;
    let d = params_init.dim();
    if avf_init.dim() != d || avf_init.rank() != cfg.rank {
        return Err(shape_err(format!("AVF init is rank {} dim {}, config rank {} dim {d}", avf_init.rank(), avf_init.dim(), cfg.rank)));
    }
    let mut params = params_init.clone();
    let mut avf = avf_init.clone();
    let mut theta = theta_vec(&params);
    let mut lambda = avf.to_vec();
    let mut theta_upd = Updater::new(cfg.theta_rule, cfg.step_size_theta, theta.len());
    let mut lambda_upd = Updater::new(cfg.lambda_rule, cfg.step_size_lambda, lambda.len());
    let mut steps = Vec::with_capacity(cfg.n_steps);
    let mut snapshots = vec![AvfSnapshot { step: 0, params: params.clone(), avf: avf.clone() }];
    let n = cfg.samples_per_step as f64;
    for step in 1..=cfg.n_steps {
        let fields = EllipticalFields::from_mvn(&params, Some(avf.clone()))?;
        let mut theta_grad = vec![0.0; theta.len()];
        let mut lambda_grad = vec![0.0; lambda.len()];
        let mut surrogate = 0.0;
        for _ in 0..cfg.samples_per_step {
            let z = params.sample(rng).value;
            let g = fields.pathwise(&f.gradient(&z), &z)?;
            for (acc, x) in theta_grad.iter_mut().zip(g.iter()) {
                *acc += x / n;
            }
            let lg = variance_grad_lambda(&params, &avf, f, &z)?;
            let flat = AvfParams::new(lg.b_grad, lg.c_grad)?.to_vec();
            for (acc, x) in lambda_grad.iter_mut().zip(flat) {
                *acc += x / n;
            }
            surrogate += lg.surrogate / n;
        }
        check_finite(&theta_grad, "theta gradient", step)?;
        check_finite(&lambda_grad, "lambda gradient", step)?;
        lambda_upd.descend(&mut lambda, &lambda_grad)?;
        theta_upd.descend(&mut theta, &theta_grad)?;
        avf = AvfParams::from_vec(cfg.rank, d, &lambda)?;
        params = theta_from_vec(&params, &theta)
            .map_err(|e| Error::InvalidParameter(format!("theta left the valid region at step {step}: {e}")))?;
        steps.push(AvfStep {
            step,
            surrogate,
            theta_norm: theta.iter().map(|x| x * x).sum::<f64>().sqrt(),
            lambda_norm: lambda.iter().map(|x| x * x).sum::<f64>().sqrt(),
        });
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 && step != cfg.n_steps {
            snapshots.push(AvfSnapshot { step, params: params.clone(), avf: avf.clone() });
        }
    }
    snapshots.push(AvfSnapshot { step: cfg.n_steps, params: params.clone(), avf: avf.clone() });
    Ok(AvfTrajectory { steps, snapshots, final_params: params, final_avf: avf })
}

/// Paired comparison of the off-diagonal Cholesky gradient variance of the
/// AVF estimator against the reference (`lambda = 0`) estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceComparison {
    pub n_samples: usize,
    /// Summed per-coordinate variance, reference estimator.
    pub var_reference: f64,
    /// Summed per-coordinate variance, AVF estimator.
    pub var_adapted: f64,
    /// `var_adapted / var_reference`.
    pub ratio: f64,
    /// Mean over coordinates of the per-coordinate ratios.
    pub mean_coordinate_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Both estimators are evaluated on the same draws; the 95% interval comes
/// from a percentile bootstrap over Monte Carlo chunks.
pub fn offdiag_variance_comparison(
    params: &MultivariateNormalParams,
    avf: &AvfParams,
    f: &TestFunction,
    n_samples: usize,
    seed: u64,
    n_bootstrap: usize,
    exec: Execution,
) -> Result<VarianceComparison> {
    let d = params.dim();
    let fields = EllipticalFields::from_mvn(params, Some(avf.clone()))?;
    let pairs: Vec<(usize, usize, usize)> = {
        let mut out = Vec::new();
        let mut k = 0;
        for a in 0..d {
            for b in 0..=a {
                if a != b {
                    out.push((k, a, b));
                }
                k += 1;
            }
        }
        out
    };
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("off-diagonal comparison needs D >= 2".into()));
    }
    let p = pairs.len();
    let chunk = (n_samples / 100).clamp(1, DEFAULT_CHUNK_SIZE);
    let moments = run_chunked(n_samples, 2 * p, seed, 0, chunk, exec, |rng| {
        let z = params.sample(rng).value;
        let (base, null) = fields.chol_projections(&f.gradient(&z), &z)?;
        let mut out = DVector::zeros(2 * p);
        for (i, &(k, a, b)) in pairs.iter().enumerate() {
            out[i] = base[k];
            out[p + i] = base[k] + avf.s(a, b) * null[k];
        }
        Ok(out)
    })?;
    let summed = |m: &Moments| {
        let v = m.variance();
        (v.rows(0, p).sum(), v.rows(p, p).sum())
    };
    let total = moments.total();
    let (var_reference, var_adapted) = summed(&total);
    let v = total.variance();
    let mean_coordinate_ratio = (0..p).map(|i| if v[i] > 0.0 { v[p + i] / v[i] } else { 1.0 }).sum::<f64>() / p as f64;
    let mut rng = RngStream::new(seed, 1);
    let n_chunks = moments.chunks.len();
    let mut boot: Vec<f64> = (0..n_bootstrap)
        .map(|_| {
            let mut m = Moments::new(2 * p);
            for _ in 0..n_chunks {
                m.merge(&moments.chunks[(rng.next_u64() % n_chunks as u64) as usize]);
            }
            let (r, a) = summed(&m);
            a / r
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = match boot.len() {
        0 => (f64::NAN, f64::NAN),
        n => (boot[(0.025 * n as f64) as usize], boot[((0.975 * n as f64) as usize).min(n - 1)]),
    };
    Ok(VarianceComparison {
        n_samples,
        var_reference,
        var_adapted,
        ratio: var_adapted / var_reference,
        mean_coordinate_ratio,
        ci_low,
        ci_high,
    })
}
