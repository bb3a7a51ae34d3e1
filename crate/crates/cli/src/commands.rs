//! The five experiment commands. Each has a typed core returning rows and a
//! wrapper rendering them as CSV.

use nalgebra::DVector;
use pathwise::avf::{avf_optimize, offdiag_variance_comparison, AvfOptimizerConfig, VarianceComparison};
use pathwise::distributions::{Density, DiagNormals, MixtureFamily, MixtureParams};
use pathwise::estimators::{gumbel_softmax_grad, GumbelConfig, GumbelMode, TestFunction, TestFunctionKind};
use pathwise::fields::{
    logit_fields, pairwise_field, AvfParams, EllipticalFields, FieldProvider, MixtureFieldOptions, MixtureFields, NegativeExampleFields,
};
use pathwise::instances::{offdiag_mvn, random_direction, random_mixture, random_mvn, random_student_t, sphere_mixture};
use pathwise::montecarlo::{run_chunked, Execution, Moments};
use pathwise::numerics::{FiniteDiffConfig, RngStream};
use pathwise::verification::{boundary_decay_probe, transport_residuals, RayFrame, VANISHING_FLUX};

use crate::config::{Experiment, ExperimentConfig};
use crate::csv::{fmt_f64, CsvTable};
use crate::error::{CliError, CliResult};
use crate::toy::{default_init, run_sgvi, SgviConfig, SgviEstimator, SgviTrace, ToyTarget};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RESIDUAL_TOL: f64 = 1e-5;
pub const DECAY_TOL: f64 = 1e-8;
pub const SUM_TOL: f64 = 1e-12;
pub const STUDENT_T_DOF: f64 = 4.0;
pub const AVF_DRAWS: usize = 20;
pub const SURROGATE_WINDOW: usize = 500;

/// Rendered CSV plus whether every gated row passed.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub csv: String,
    pub passed: bool,
}

pub fn run(experiment: Experiment, cfg: &ExperimentConfig) -> CliResult<CommandOutput> {
    cfg.validate()?;
    let (table, passed) = match experiment {
        Experiment::CheckTransport => {
            let rows = check_transport(cfg)?;
            let passed = rows.iter().all(|r| r.pass);
            (transport_table(&rows), passed)
        }
        Experiment::BenchMvn => (mvn_table(&bench_mvn(cfg)?), true),
        Experiment::BenchMixture => (mixture_table(&bench_mixture(cfg)?), true),
        Experiment::SgviToy => (sgvi_table(&sgvi_toy(cfg)?), true),
        Experiment::AdaptAvf => (avf_table(&adapt_avf(cfg)?), true),
    };
    Ok(CommandOutput { csv: table.render(VERSION, &cfg.hash(), cfg.seed_or(0)), passed })
}

fn first<T: Copy>(list: &Option<Vec<T>>, default: T) -> T {
    list.as_ref().and_then(|v| v.first().copied()).unwrap_or(default)
}

fn list<T: Clone>(list: &Option<Vec<T>>, default: &[T]) -> Vec<T> {
    list.clone().unwrap_or_else(|| default.to_vec())
}

fn parse_test_function(name: &str) -> CliResult<TestFunctionKind> {
    TestFunctionKind::parse(name).ok_or_else(|| CliError::Config(format!("unknown test function {name}")))
}

/// Stable per-instance stream id from small indices.
fn stream_id(parts: &[usize]) -> u64 {
    parts.iter().fold(17u64, |acc, &p| acc.wrapping_mul(1_000_003).wrapping_add(p as u64))
}

// ---------------------------------------------------------------- transport

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FieldFamily {
    Mvn,
    StudentT,
    Mixture(MixtureFamily),
}

impl FieldFamily {
    fn name(self) -> &'static str {
        match self {
            FieldFamily::Mvn => "mvn",
            FieldFamily::StudentT => "student_t",
            FieldFamily::Mixture(f) => f.name(),
        }
    }

    fn all() -> Vec<FieldFamily> {
        let mut out = vec![FieldFamily::Mvn, FieldFamily::StudentT];
        out.extend(MixtureFamily::ALL.into_iter().map(FieldFamily::Mixture));
        out
    }

    fn parse_list(tags: &Option<Vec<String>>) -> CliResult<Vec<FieldFamily>> {
        let Some(tags) = tags else { return Ok(Self::all()) };
        let mut out = Vec::new();
        for t in tags {
            if t == "all" {
                return Ok(Self::all());
            }
            let f = Self::all().into_iter().find(|f| f.name() == t).ok_or_else(|| CliError::Config(format!("unknown family {t}")))?;
            out.push(f);
        }
        Ok(out)
    }
}

fn mixture_families(tags: &Option<Vec<String>>) -> CliResult<Vec<MixtureFamily>> {
    let Some(tags) = tags else { return Ok(MixtureFamily::ALL.to_vec()) };
    if tags.iter().any(|t| t == "all") {
        return Ok(MixtureFamily::ALL.to_vec());
    }
    tags.iter().map(|t| MixtureFamily::parse(t).ok_or_else(|| CliError::Config(format!("unknown mixture family {t}")))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportRow {
    pub check: &'static str,
    pub family: String,
    pub components: usize,
    pub dim: usize,
    pub instance: usize,
    pub points: usize,
    pub worst: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl TransportRow {
    #[allow(clippy::too_many_arguments)]
    fn new(
        check: &'static str,
        family: &str,
        k: usize,
        d: usize,
        instance: usize,
        points: usize,
        worst: String,
        value: f64,
        threshold: f64,
    ) -> Self {
        Self { check, family: family.into(), components: k, dim: d, instance, points, worst, value, threshold, pass: value < threshold }
    }
}

fn worst_residual<D: Density, P: FieldProvider>(dist: &D, prov: &P, n: usize, rng: &mut RngStream) -> CliResult<(f64, String)> {
    let mut worst = (0.0, String::new());
    for _ in 0..n {
        let z = dist.sample(rng).value;
        for r in transport_residuals(dist, prov, &z, FiniteDiffConfig::default())? {
            if !(r.relative_residual <= worst.0) {
                worst = (r.relative_residual, r.coordinate.to_string());
            }
        }
    }
    Ok(worst)
}

fn probe_directions(d: usize, rng: &mut RngStream) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(2 * d + 4);
    for i in 0..d {
        let e = DVector::from_fn(d, |k, _| if k == i { 1.0 } else { 0.0 });
        out.push(-&e);
        out.push(e);
    }
    out.extend((0..4).map(|_| random_direction(d, rng)));
    out
}

fn worst_decay<D: Density, P: FieldProvider>(
    dist: &D,
    prov: &P,
    frame: &RayFrame,
    dirs: &[DVector<f64>],
    radii: [f64; 2],
) -> CliResult<(f64, String)> {
    let mut worst = (0.0, String::new());
    for dir in dirs {
        let prof = boundary_decay_probe(dist, prov, frame, dir, &radii)?;
        for (p, c) in prof.coordinates.iter().enumerate() {
            let r = prof.ratio(p, 0, 1);
            if !(r <= worst.0) {
                worst = (r, c.to_string());
            }
        }
    }
    Ok(worst)
}

/// Largest relative deviation of the t-flux ratio from its polynomial rate.
fn student_t_rate_deviation(t: &pathwise::distributions::StudentTParams, prov: &EllipticalFields, dirs: &[DVector<f64>]) -> CliResult<f64> {
    let d = t.dim() as f64;
    let nu = t.dof();
    let shape = |r: f64| (1.0 + r * r / nu).powf(-0.5 * (nu + d));
    let mut worst = 0.0f64;
    for dir in dirs {
        let prof = boundary_decay_probe(t, prov, &RayFrame::from_student_t(t), dir, &[1.0, 10.0])?;
        for (p, c) in prof.coordinates.iter().enumerate() {
            if prof.flux[0][p] <= VANISHING_FLUX * prof.flux[0].max() {
                continue;
            }
            let linear = if matches!(c, pathwise::distributions::Coordinate::Mean(_)) { 1.0 } else { 10.0 };
            let expected = linear * shape(10.0) / shape(1.0);
            worst = worst.max((prof.ratio(p, 0, 1) / expected - 1.0).abs());
        }
    }
    Ok(worst)
}

fn negative_example_instance(d: usize) -> CliResult<MixtureParams> {
    let means = nalgebra::DMatrix::from_fn(2, d, |j, i| if i == 0 { [-1.0, 1.0][j] } else { 0.3 * j as f64 });
    let scales = nalgebra::DMatrix::from_fn(2, d, |j, i| 0.8 + 0.2 * ((j + i) % 3) as f64);
    Ok(DiagNormals::new(DVector::from_vec(vec![0.3, -0.2]), means, scales)?.into())
}

/// Residual, boundary and antisymmetry checks over every requested family.
pub fn check_transport(cfg: &ExperimentConfig) -> CliResult<Vec<TransportRow>> {
    let families = FieldFamily::parse_list(&cfg.family)?;
    let dims = list(&cfg.dim, &[1, 2, 3, 5, 8]);
    let ks = list(&cfg.components, &[1, 2, 3, 5]);
    let points = cfg.samples.unwrap_or(20);
    let rank = cfg.rank.unwrap_or(2);
    let seed = cfg.seed_or(0);
    let mut rows = Vec::new();
    for (fi, fam) in families.iter().enumerate() {
        for &d in &dims {
            let mut rng = RngStream::new(seed, stream_id(&[fi, d]));
            let dirs = probe_directions(d, &mut rng);
            match fam {
                FieldFamily::Mvn => {
                    let q = random_mvn(d, &mut rng)?;
                    let frame = RayFrame::from_mvn(&q);
                    for inst in 0..=AVF_DRAWS {
                        let avf = if inst == 0 { None } else { Some(AvfParams::random(rank, d, 1.0, &mut rng)?) };
                        let prov = EllipticalFields::from_mvn(&q, avf)?;
                        let (v, at) = worst_residual(&q, &prov, points, &mut rng)?;
                        rows.push(TransportRow::new("residual", "mvn", 1, d, inst, points, at, v, RESIDUAL_TOL));
                        let (v, at) = worst_decay(&q, &prov, &frame, &dirs, [1.0, 10.0])?;
                        rows.push(TransportRow::new("decay", "mvn", 1, d, inst, dirs.len(), at, v, DECAY_TOL));
                    }
                }
                FieldFamily::StudentT => {
                    let t = random_student_t(d, STUDENT_T_DOF, &mut rng)?;
                    let prov = EllipticalFields::from_student_t(&t, Some(AvfParams::random(rank, d, 1.0, &mut rng)?))?;
                    let (v, at) = worst_residual(&t, &prov, points, &mut rng)?;
                    rows.push(TransportRow::new("residual", "student_t", 1, d, 0, points, at, v, RESIDUAL_TOL));
                    let dev = student_t_rate_deviation(&t, &prov, &dirs)?;
                    rows.push(TransportRow::new("decay_rate", "student_t", 1, d, 0, dirs.len(), String::new(), dev, 1e-9));
                    let (v, at) = worst_decay(&t, &prov, &RayFrame::from_student_t(&t), &dirs, [1.0, 1e4])?;
                    rows.push(TransportRow::new("decay_far", "student_t", 1, d, 0, dirs.len(), at, v, DECAY_TOL));
                }
                FieldFamily::Mixture(mf) => {
                    for &k in &ks {
                        let q = random_mixture(*mf, k, d, &mut rng)?;
                        let prov = MixtureFields::new(q.clone(), MixtureFieldOptions::default())?;
                        let name = mf.name();
                        let (v, at) = worst_residual(&q, &prov, points, &mut rng)?;
                        rows.push(TransportRow::new("residual", name, k, d, 0, points, at, v, RESIDUAL_TOL));
                        let (v, at) = worst_decay(&q, &prov, &RayFrame::from_mixture(&q), &dirs, [1.0, 10.0])?;
                        rows.push(TransportRow::new("decay", name, k, d, 0, dirs.len(), at, v, DECAY_TOL));
                        let mut worst_sum = 0.0f64;
                        for _ in 0..points {
                            let z = q.sample(&mut rng).value;
                            let set = logit_fields(&q, &z, &MixtureFieldOptions::default())?;
                            let scale = set.values().amax().max(1.0);
                            worst_sum = worst_sum.max(set.values().column_sum().amax() / scale);
                            if matches!(mf, MixtureFamily::SharedDiagCov | MixtureFamily::Gsm) {
                                for j in 0..k {
                                    for l in 0..j {
                                        let a = pairwise_field(&q, j, l, &z)?;
                                        let b = pairwise_field(&q, l, j, &z)?;
                                        worst_sum = worst_sum.max((&a + &b).amax() / a.amax().max(1.0));
                                    }
                                }
                            }
                        }
                        rows.push(TransportRow::new("antisymmetry", name, k, d, 0, points, String::new(), worst_sum, SUM_TOL));
                    }
                }
            }
        }
    }
    if cfg.field.as_deref() == Some("negative-example") {
        for d in [1, 2] {
            let q = negative_example_instance(d)?;
            let prov = NegativeExampleFields::new(q.clone())?;
            let e1 = DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 });
            let (v, at) = worst_decay(&q, &prov, &RayFrame::from_mixture(&q), &[e1], [1.0, 10.0])?;
            rows.push(TransportRow::new("decay", "negative_example", 2, d, 0, 1, at, v, DECAY_TOL));
        }
    }
    Ok(rows)
}

fn transport_table(rows: &[TransportRow]) -> CsvTable {
    let mut t = CsvTable::new(&["check", "family", "K", "D", "instance", "points", "worst_coordinate", "value", "threshold", "pass"]);
    for r in rows {
        t.push(&[
            r.check.into(),
            r.family.clone(),
            r.components.to_string(),
            r.dim.to_string(),
            r.instance.to_string(),
            r.points.to_string(),
            r.worst.clone(),
            fmt_f64(r.value),
            fmt_f64(r.threshold),
            r.pass.to_string(),
        ]);
    }
    t
}

// ---------------------------------------------------------------- bench-mvn

#[derive(Debug, Clone, PartialEq)]
pub struct MvnRow {
    pub r: f64,
    pub dim: usize,
    pub test_function: &'static str,
    pub estimator: &'static str,
    pub seed: u64,
    pub steps: usize,
    pub comparison: VarianceComparison,
}

/// Adapt `lambda` at frozen `theta`, then compare off-diagonal Cholesky
/// gradient variances against the reference estimator.
pub fn bench_mvn(cfg: &ExperimentConfig) -> CliResult<Vec<MvnRow>> {
    let d = first(&cfg.dim, 50);
    let rs = list(&cfg.r_sweep, &[0.0, 0.5, 1.0]);
    let tfs: Vec<TestFunctionKind> =
        list(&cfg.test_function, &["quadratic".into()]).iter().map(|s| parse_test_function(s)).collect::<CliResult<_>>()?;
    let steps = cfg.steps.unwrap_or(2000);
    let n = cfg.samples.unwrap_or(20_000);
    let rank = cfg.rank.unwrap_or(1);
    let seed = cfg.seed_or(0);
    let init_scale = cfg.init_scale.unwrap_or(0.01);
    let n_boot = cfg.bootstrap.unwrap_or(500);
    let mut rows = Vec::new();
    for (ri, &r) in rs.iter().enumerate() {
        for (ti, &kind) in tfs.iter().enumerate() {
            let mut rng = RngStream::new(seed, stream_id(&[ri, ti]));
            let q = offdiag_mvn(d, r, &mut rng)?;
            let f = TestFunction::synthetic(kind, d, &mut rng)?;
            let avf0 = AvfParams::random(rank, d, init_scale, &mut rng)?;
            let avf = if steps == 0 {
                avf0
            } else {
                let opt = AvfOptimizerConfig {
                    step_size_theta: 0.0,
                    step_size_lambda: cfg.step_size_lambda.unwrap_or(0.01),
                    n_steps: steps,
                    samples_per_step: cfg.samples_per_step.unwrap_or(1),
                    rank,
                    ..Default::default()
                };
                avf_optimize(&q, &avf0, &f, &opt, &mut rng.derive(1))?.final_avf
            };
            let comparison = offdiag_variance_comparison(&q, &avf, &f, n, seed ^ stream_id(&[ri, ti, 2]), n_boot, Execution::Parallel)?;
            rows.push(MvnRow { r, dim: d, test_function: kind.name(), estimator: "avf", seed, steps, comparison });
        }
    }
    Ok(rows)
}

fn mvn_table(rows: &[MvnRow]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "r",
        "D",
        "test_function",
        "estimator",
        "steps",
        "n_samples",
        "seed",
        "var_ratio",
        "ci_low",
        "ci_high",
        "mean_coordinate_ratio",
        "var_rt",
        "var_avf",
    ]);
    for r in rows {
        let c = &r.comparison;
        t.push(&[
            fmt_f64(r.r),
            r.dim.to_string(),
            r.test_function.into(),
            r.estimator.into(),
            r.steps.to_string(),
            c.n_samples.to_string(),
            r.seed.to_string(),
            fmt_f64(c.ratio),
            fmt_f64(c.ci_low),
            fmt_f64(c.ci_high),
            fmt_f64(c.mean_coordinate_ratio),
            fmt_f64(c.var_reference),
            fmt_f64(c.var_adapted),
        ]);
    }
    t
}

// ------------------------------------------------------------ bench-mixture

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogitEstimator {
    Pathwise,
    Score,
    Hybrid,
    GsSoft,
    GsHard,
}

impl LogitEstimator {
    pub const ALL: [LogitEstimator; 5] =
        [LogitEstimator::Pathwise, LogitEstimator::Score, LogitEstimator::Hybrid, LogitEstimator::GsSoft, LogitEstimator::GsHard];

    pub fn name(self) -> &'static str {
        match self {
            LogitEstimator::Pathwise => "pathwise",
            LogitEstimator::Score => "score",
            LogitEstimator::Hybrid => "hybrid",
            LogitEstimator::GsSoft => "gs-soft",
            LogitEstimator::GsHard => "gs-hard",
        }
    }

    fn parse(s: &str) -> CliResult<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| CliError::Config(format!("unknown estimator {s}")))
    }

    fn is_gumbel(self) -> bool {
        matches!(self, LogitEstimator::GsSoft | LogitEstimator::GsHard)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureRow {
    pub family: &'static str,
    pub dim: usize,
    pub components: usize,
    pub estimator: &'static str,
    pub n_samples: usize,
    pub seed: u64,
    pub var_logits: f64,
    pub var_ratio_vs_score: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub var_ratio_vs_pathwise: f64,
}

fn percentile_interval(mut xs: Vec<f64>) -> (f64, f64) {
    xs.retain(|x| x.is_finite());
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    (xs[(0.025 * n as f64) as usize], xs[((0.975 * n as f64) as usize).min(n - 1)])
}

/// Summed logit-gradient variance of each estimator on the sphere geometry,
/// with paired bootstrap intervals for the ratio to the score estimator.
pub fn bench_mixture(cfg: &ExperimentConfig) -> CliResult<Vec<MixtureRow>> {
    let families = mixture_families(&cfg.family)?;
    let dims = list(&cfg.dim, &[50]);
    let ks = list(&cfg.components, &[10]);
    let requested: Vec<LogitEstimator> = list(&cfg.estimators, &["pathwise".into(), "score".into(), "hybrid".into()])
        .iter()
        .map(|s| LogitEstimator::parse(s))
        .collect::<CliResult<_>>()?;
    let n = cfg.samples.unwrap_or(20_000);
    let seed = cfg.seed_or(0);
    let n_boot = cfg.bootstrap.unwrap_or(500);
    let tau = cfg.temperature.unwrap_or(0.5);
    let mut rows = Vec::new();
    for (fi, &family) in families.iter().enumerate() {
        for &d in &dims {
            for &k in &ks {
                let mut rng = RngStream::new(seed, stream_id(&[fi, d, k]));
                let q = sphere_mixture(family, k, d, &mut rng)?;
                let f = TestFunction::sq_norm(d)?;
                // score is always computed as the reference
                let mut ests = vec![LogitEstimator::Score];
                for e in &requested {
                    if !ests.contains(e) && (!e.is_gumbel() || family == MixtureFamily::DiagNormals) {
                        ests.push(*e);
                    }
                }
                let opts = MixtureFieldOptions::default();
                let m = ests.len();
                let chunk = (n / 100).max(1);
                let moments = run_chunked(n, m * k, seed, stream_id(&[fi, d, k, 1]), chunk, Execution::Parallel, |rng| {
                    let z = q.sample(rng).value;
                    let mut out = DVector::zeros(m * k);
                    for (ei, e) in ests.iter().enumerate() {
                        let v = match e {
                            LogitEstimator::Pathwise => logit_fields(&q, &z, &opts)?.dot(&f.gradient(&z))?,
                            LogitEstimator::Score | LogitEstimator::Hybrid => q.score_logits(&z) * f.value(&z),
                            LogitEstimator::GsSoft | LogitEstimator::GsHard => {
                                let mode = if *e == LogitEstimator::GsSoft { GumbelMode::Soft } else { GumbelMode::Hard };
                                gumbel_softmax_grad(&q, &f, GumbelConfig::new(tau, mode)?, rng)?.1.rows(0, k).into_owned()
                            }
                        };
                        out.rows_mut(ei * k, k).copy_from(&v);
                    }
                    Ok(out)
                })?;
                let summed = |mo: &Moments| -> Vec<f64> {
                    let v = mo.variance();
                    (0..m).map(|e| v.rows(e * k, k).sum()).collect()
                };
                let total = summed(&moments.total());
                let mut boot_rng = RngStream::new(seed, stream_id(&[fi, d, k, 2]));
                let nc = moments.chunks.len();
                let boots: Vec<Vec<f64>> = (0..n_boot)
                    .map(|_| {
                        let mut acc = Moments::new(m * k);
                        for _ in 0..nc {
                            acc.merge(&moments.chunks[(boot_rng.next_u64() % nc as u64) as usize]);
                        }
                        summed(&acc)
                    })
                    .collect();
                let pathwise_idx = ests.iter().position(|e| *e == LogitEstimator::Pathwise);
                for (ei, e) in ests.iter().enumerate() {
                    if !requested.contains(e) {
                        continue;
                    }
                    let (ci_low, ci_high) = percentile_interval(boots.iter().map(|b| b[ei] / b[0]).collect());
                    rows.push(MixtureRow {
                        family: family.name(),
                        dim: d,
                        components: k,
                        estimator: e.name(),
                        n_samples: n,
                        seed,
                        var_logits: total[ei],
                        var_ratio_vs_score: total[ei] / total[0],
                        ci_low,
                        ci_high,
                        var_ratio_vs_pathwise: pathwise_idx.map_or(f64::NAN, |p| total[ei] / total[p]),
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn mixture_table(rows: &[MixtureRow]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "family",
        "D",
        "K",
        "estimator",
        "n_samples",
        "seed",
        "var_logits",
        "var_ratio_vs_score",
        "ci_low",
        "ci_high",
        "var_ratio_vs_pathwise",
    ]);
    for r in rows {
        t.push(&[
            r.family.into(),
            r.dim.to_string(),
            r.components.to_string(),
            r.estimator.into(),
            r.n_samples.to_string(),
            r.seed.to_string(),
            fmt_f64(r.var_logits),
            fmt_f64(r.var_ratio_vs_score),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            fmt_f64(r.var_ratio_vs_pathwise),
        ]);
    }
    t
}

// ----------------------------------------------------------------- sgvi-toy

/// SGVI against the toy target for every estimator and seed.
pub fn sgvi_toy(cfg: &ExperimentConfig) -> CliResult<Vec<SgviTrace>> {
    let estimators: Vec<SgviEstimator> = match &cfg.estimators {
        None => SgviEstimator::ALL.to_vec(),
        Some(tags) => tags
            .iter()
            .map(|s| SgviEstimator::parse(s).ok_or_else(|| CliError::Config(format!("unknown estimator {s}"))))
            .collect::<CliResult<_>>()?,
    };
    let defaults = SgviConfig::default();
    let sgvi = SgviConfig {
        steps: cfg.steps.unwrap_or(defaults.steps),
        learning_rate: cfg.step_size_theta.unwrap_or(defaults.learning_rate),
        eval_samples: cfg.samples.unwrap_or(defaults.eval_samples),
        temperature: cfg.temperature.unwrap_or(defaults.temperature),
        ..defaults
    };
    let seed = cfg.seed_or(0);
    let n_seeds = cfg.seeds.unwrap_or(20);
    let target = ToyTarget::standard();
    let init = default_init();
    let mut out = Vec::new();
    for e in estimators {
        for s in 0..n_seeds as u64 {
            out.push(run_sgvi(&target, &init, e, &sgvi, seed.wrapping_add(s))?);
        }
    }
    Ok(out)
}

fn sgvi_table(traces: &[SgviTrace]) -> CsvTable {
    let mut t = CsvTable::new(&["step", "estimator", "seed", "elbo", "kl_to_target"]);
    for tr in traces {
        for p in &tr.points {
            t.push(&[p.step.to_string(), tr.estimator.name().into(), tr.seed.to_string(), fmt_f64(p.elbo), fmt_f64(p.kl_to_target)]);
        }
    }
    t
}

// ---------------------------------------------------------------- adapt-avf

#[derive(Debug, Clone, PartialEq)]
pub struct AvfRow {
    pub step: usize,
    pub surrogate: f64,
    pub window_mean: f64,
    pub theta_norm: f64,
    pub lambda_norm: f64,
}

/// Trajectory of one adaptation run with a trailing-window surrogate mean.
pub fn adapt_avf(cfg: &ExperimentConfig) -> CliResult<Vec<AvfRow>> {
    let d = first(&cfg.dim, 50);
    let r = first(&cfg.r_sweep, 1.0);
    let kind = parse_test_function(&list(&cfg.test_function, &["quadratic".into()])[0])?;
    let rank = cfg.rank.unwrap_or(1);
    let seed = cfg.seed_or(0);
    let mut rng = RngStream::new(seed, 0);
    let q = offdiag_mvn(d, r, &mut rng)?;
    let f = TestFunction::synthetic(kind, d, &mut rng)?;
    let avf0 = AvfParams::random(rank, d, cfg.init_scale.unwrap_or(0.01), &mut rng)?;
    let opt = AvfOptimizerConfig {
        step_size_theta: cfg.step_size_theta.unwrap_or(0.0),
        step_size_lambda: cfg.step_size_lambda.unwrap_or(0.01),
        n_steps: cfg.steps.unwrap_or(2000),
        samples_per_step: cfg.samples_per_step.unwrap_or(1),
        rank,
        ..Default::default()
    };
    let tr = avf_optimize(&q, &avf0, &f, &opt, &mut rng.derive(1))?;
    let mut rows = Vec::with_capacity(tr.steps.len());
    let mut window_sum = 0.0;
    for (i, s) in tr.steps.iter().enumerate() {
        window_sum += s.surrogate;
        if i >= SURROGATE_WINDOW {
            window_sum -= tr.steps[i - SURROGATE_WINDOW].surrogate;
        }
        let len = (i + 1).min(SURROGATE_WINDOW);
        rows.push(AvfRow {
            step: s.step,
            surrogate: s.surrogate,
            window_mean: window_sum / len as f64,
            theta_norm: s.theta_norm,
            lambda_norm: s.lambda_norm,
        });
    }
    Ok(rows)
}

fn avf_table(rows: &[AvfRow]) -> CsvTable {
    let mut t = CsvTable::new(&["step", "surrogate_second_moment", "var_estimate_window", "theta_norm", "lambda_norm"]);
    for r in rows {
        t.push(&[r.step.to_string(), fmt_f64(r.surrogate), fmt_f64(r.window_mean), fmt_f64(r.theta_norm), fmt_f64(r.lambda_norm)]);
    }
    t
}
