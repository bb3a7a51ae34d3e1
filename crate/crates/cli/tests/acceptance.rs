//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use pathwise::avf::variance_grad_lambda;
use pathwise::distributions::{Density, MixtureFamily, MultivariateNormalParams};
use pathwise::estimators::{hybrid_grad, pathwise_grad, score_grad, TestFunction, TestFunctionKind};
use pathwise::fields::{AvfParams, EllipticalFields, FieldProvider, MixtureFieldOptions, MixtureFields};
use pathwise::instances::{random_mixture, random_mvn, random_student_t};
use pathwise::montecarlo::Execution;
use pathwise::numerics::special::{erfc, radial_cdf};
use pathwise::numerics::RngStream;
use pathwise::verification::{unbiasedness_ztest, ZTestReport};
use pathwise_cli::commands::{bench_mixture, bench_mvn, check_transport, sgvi_toy};
use pathwise_cli::toy::SgviEstimator;
use pathwise_cli::ExperimentConfig;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = fn() -> Outcome;

fn residual_suite() -> Outcome {
    let cfg = ExperimentConfig { samples: Some(100), ..Default::default() };
    let rows = check_transport(&cfg).unwrap();
    let residuals: Vec<_> = rows.iter().filter(|r| r.check == "residual").collect();
    let families: std::collections::BTreeSet<&str> = residuals.iter().map(|r| r.family.as_str()).collect();
    let avf_draws = residuals.iter().filter(|r| r.family == "mvn" && r.instance > 0).count() / 5;
    let worst = residuals.iter().map(|r| r.value).fold(0.0, f64::max);
    let pass = residuals.iter().all(|r| r.pass && r.points == 100) && families.len() == 6 && avf_draws == 20;
    outcome(pass, format!("{} instances over {} families, worst relative residual {worst:.2e}", residuals.len(), families.len()))
}

fn ztests(reports: Vec<ZTestReport>, count: &mut usize, worst: &mut f64) -> bool {
    *count += reports.len();
    for r in &reports {
        *worst = worst.max(r.z_score.abs());
    }
    reports.iter().all(|r| r.pass)
}

fn unbiasedness_suite() -> Outcome {
    const N: usize = 200_000;
    let mut rng = RngStream::new(900, 0);
    let (mut count, mut worst, mut pass) = (0, 0.0f64, true);
    let mut seed = 0u64;
    let mut next_seed = || {
        seed += 1;
        seed
    };
    for d in [3, 50] {
        let q = random_mvn(d, &mut rng).unwrap();
        let f = TestFunction::synthetic(TestFunctionKind::Quadratic, d, &mut rng).unwrap();
        for avf in [None, Some(AvfParams::random(2, d, 0.5, &mut rng).unwrap())] {
            let prov = EllipticalFields::from_mvn(&q, avf).unwrap();
            let r = unbiasedness_ztest(|s| pathwise_grad(&prov, &f, &s.value), &q, &f, N, next_seed(), Execution::Parallel).unwrap();
            pass &= ztests(r, &mut count, &mut worst);
        }
    }
    let t = random_student_t(5, 10.0, &mut rng).unwrap();
    let f = TestFunction::sq_norm(5).unwrap();
    let prov = EllipticalFields::from_student_t(&t, Some(AvfParams::random(1, 5, 0.5, &mut rng).unwrap())).unwrap();
    let r = unbiasedness_ztest(|s| pathwise_grad(&prov, &f, &s.value), &t, &f, N, next_seed(), Execution::Parallel).unwrap();
    pass &= ztests(r, &mut count, &mut worst);
    for family in MixtureFamily::ALL {
        for (k, d) in [(3, 4), (10, 3), (2, 50)] {
            let q = random_mixture(family, k, d, &mut rng).unwrap();
            let f = if d == 50 {
                TestFunction::sq_norm(d).unwrap()
            } else {
                TestFunction::synthetic(TestFunctionKind::Quadratic, d, &mut rng).unwrap()
            };
            let prov = MixtureFields::new(q.clone(), MixtureFieldOptions::default()).unwrap();
            let r = unbiasedness_ztest(|s| pathwise_grad(&prov, &f, &s.value), &q, &f, N, next_seed(), Execution::Parallel).unwrap();
            pass &= ztests(r, &mut count, &mut worst);
            let r = unbiasedness_ztest(|s| Ok(score_grad(&q, &f, s)), &q, &f, N, next_seed(), Execution::Parallel).unwrap();
            pass &= ztests(r, &mut count, &mut worst);
            let r = unbiasedness_ztest(|s| hybrid_grad(&q, &f, s), &q, &f, N, next_seed(), Execution::Parallel).unwrap();
            pass &= ztests(r, &mut count, &mut worst);
        }
    }
    outcome(pass, format!("{count} coordinate z-tests at N={N}, max |z| {worst:.2}"))
}

fn mixture_variance() -> Outcome {
    let cfg = ExperimentConfig { samples: Some(20_000), bootstrap: Some(200), ..Default::default() };
    let rows = bench_mixture(&cfg).unwrap();
    let pathwise: Vec<_> = rows.iter().filter(|r| r.estimator == "pathwise").collect();
    let pass = pathwise.len() == 4 && pathwise.iter().all(|r| r.dim == 50 && r.components == 10 && r.ci_high < 0.2);
    let detail = pathwise.iter().map(|r| format!("{} {:.4}", r.family, r.var_ratio_vs_score)).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("pathwise/score logit variance: {detail}"))
}

fn avf_variance() -> Outcome {
    let adapted = ExperimentConfig { r_sweep: Some(vec![1.0]), bootstrap: Some(500), ..Default::default() };
    let a = bench_mvn(&adapted).unwrap().remove(0).comparison;
    let zero = ExperimentConfig { steps: Some(0), init_scale: Some(0.0), ..adapted };
    let z = bench_mvn(&zero).unwrap().remove(0).comparison;
    let pass = a.ci_high < 1.0 && z.ci_low <= 1.0 && 1.0 <= z.ci_high;
    outcome(pass, format!("adapted ratio {:.4} [{:.4}, {:.4}], zero-field ratio {:.4}", a.ratio, a.ci_low, a.ci_high, z.ratio))
}

fn squared_sum(q: &MultivariateNormalParams, avf: &AvfParams, f: &TestFunction, z: &DVector<f64>) -> f64 {
    let prov = EllipticalFields::from_mvn(q, Some(avf.clone())).unwrap();
    prov.fields(z).unwrap().dot(&f.gradient(z)).unwrap().norm_squared()
}

fn lambda_gradient() -> Outcome {
    let mut rng = RngStream::new(901, 0);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut pass = true;
    for inst in 0..50 {
        let d = 1 + inst % 8;
        let m = 1 + inst % 3;
        let q = random_mvn(d, &mut rng).unwrap();
        let kind = [TestFunctionKind::Quadratic, TestFunctionKind::Cosine, TestFunctionKind::Quartic][inst % 3];
        let f = TestFunction::synthetic(kind, d, &mut rng).unwrap();
        let avf = AvfParams::random(m, d, 0.7, &mut rng).unwrap();
        let z = q.sample(&mut rng).value;
        let lg = variance_grad_lambda(&q, &avf, &f, &z).unwrap();
        let analytic = AvfParams::new(lg.b_grad, lg.c_grad).unwrap().to_vec();
        let base = avf.to_vec();
        let scale = analytic.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for i in 0..base.len() {
            let (mut up, mut down) = (base.clone(), base.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (squared_sum(&q, &AvfParams::from_vec(m, d, &up).unwrap(), &f, &z)
                - squared_sum(&q, &AvfParams::from_vec(m, d, &down).unwrap(), &f, &z))
                / (2.0 * h);
            let rel = (fd - analytic[i]).abs() / fd.abs().max(1e-3 * scale).max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            pass &= rel <= 1e-4;
        }
    }
    outcome(pass, format!("50 instances, worst relative error {worst:.2e}"))
}

fn decay_discrimination() -> Outcome {
    let cfg = ExperimentConfig { field: Some("negative-example".into()), ..Default::default() };
    let rows = check_transport(&cfg).unwrap();
    let positives = rows.iter().filter(|r| r.check.starts_with("decay") && r.family != "negative_example");
    let positive_ok = positives.clone().all(|r| r.pass);
    let neg = |d| rows.iter().find(|r| r.family == "negative_example" && r.dim == d).unwrap();
    let pass = positive_ok && !neg(2).pass && neg(1).pass;
    outcome(
        pass,
        format!(
            "{} positive probes pass: {positive_ok}, negative D=2 ratio {:.3e}, D=1 ratio {:.3e}",
            positives.count(),
            neg(2).value,
            neg(1).value
        ),
    )
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let (lo, hi) = (a + p as f64 * h, a + (p + 1) as f64 * h);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            half * rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>()
        })
        .sum()
}

fn radial_cdf_quadrature(z: f64, d: usize) -> f64 {
    let ln_pref = (1.0 - d as f64) * z.ln() - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z;
    let body = integrate(|s| ((d - 1) as f64 * (z + s).ln() - 0.5 * s * s - z * s).exp(), 0.0, 40.0, 400);
    (ln_pref + body.ln()).exp()
}

fn special_functions() -> Outcome {
    let mut worst_radial = 0.0f64;
    for d in 1..=10 {
        for z in [0.05, 0.3, 1.0, 2.0, 3.7, 6.0, 12.0] {
            let expected = radial_cdf_quadrature(z, d);
            worst_radial = worst_radial.max(((radial_cdf(z, d).unwrap() - expected) / expected).abs());
        }
    }
    let worst_reflection =
        (0..=2000).map(|i| -8.0 + 16.0 * i as f64 / 2000.0).map(|x: f64| (erfc(-x) + erfc(x) - 2.0).abs()).fold(0.0, f64::max);
    outcome(
        worst_radial < 1e-10 && worst_reflection < 1e-13,
        format!("radial cdf worst relative error {worst_radial:.2e}, reflection worst {worst_reflection:.2e}"),
    )
}

fn toy_sgvi() -> Outcome {
    let cfg = ExperimentConfig { estimators: Some(vec!["pathwise".into(), "score".into()]), ..Default::default() };
    let traces = sgvi_toy(&cfg).unwrap();
    let final_mean = |e: SgviEstimator, pick: fn(&pathwise_cli::toy::SgviPoint) -> f64| {
        let finals: Vec<f64> = traces.iter().filter(|t| t.estimator == e).map(|t| pick(t.points.last().unwrap())).collect();
        (finals.iter().sum::<f64>() / finals.len() as f64, finals.len())
    };
    let (kl, seeds) = final_mean(SgviEstimator::Pathwise, |p| p.kl_to_target);
    let (elbo_p, _) = final_mean(SgviEstimator::Pathwise, |p| p.elbo);
    let (elbo_s, _) = final_mean(SgviEstimator::Score, |p| p.elbo);
    outcome(
        seeds == 20 && kl < 0.05 && elbo_p >= elbo_s,
        format!("pathwise mean KL {kl:.4} over {seeds} seeds, final ELBO pathwise {elbo_p:.4} vs score {elbo_s:.4}"),
    )
}

const SMALL_RUNS: [&[&str]; 5] = [
    &["check-transport", "--dim", "1,3", "--components", "1,2", "--samples", "5", "--field", "negative-example"],
    &["bench-mvn", "--dim", "6", "--r-sweep", "0,1", "--steps", "200", "--samples", "2000", "--bootstrap", "50"],
    &[
        "bench-mixture",
        "--dim",
        "4",
        "--components",
        "3",
        "--samples",
        "2000",
        "--bootstrap",
        "50",
        "--estimators",
        "pathwise,score,hybrid,gs-soft,gs-hard",
    ],
    &["sgvi-toy", "--steps", "500", "--seeds", "2", "--samples", "200"],
    &["adapt-avf", "--dim", "5", "--steps", "300"],
];

fn cli_csv(args: &[&str], seed: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_pathwise")).args(args).args(["--seed", seed]).output().unwrap();
    out.stdout
}

fn determinism() -> Outcome {
    let mut identical = 0;
    for args in SMALL_RUNS {
        let a = cli_csv(args, "11");
        if !a.is_empty() && a == cli_csv(args, "11") && a != cli_csv(args, "12") {
            identical += 1;
        }
    }
    outcome(
        identical == SMALL_RUNS.len(),
        format!("{identical} of {} commands byte-identical on repeat and seed-sensitive", SMALL_RUNS.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion, Duration); 9] = [
        ("transport residuals", residual_suite, Duration::from_secs(120)),
        ("unbiasedness z-tests", unbiasedness_suite, Duration::from_secs(180)),
        ("mixture logit variance", mixture_variance, Duration::from_secs(120)),
        ("adaptive field variance", avf_variance, Duration::from_secs(180)),
        ("lambda gradient", lambda_gradient, Duration::from_secs(30)),
        ("boundary decay", decay_discrimination, Duration::from_secs(30)),
        ("special functions", special_functions, Duration::from_secs(10)),
        ("toy SGVI", toy_sgvi, Duration::from_secs(300)),
        ("determinism", determinism, Duration::from_secs(300)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= budget;
        failed += usize::from(!pass);
        println!(
            "criterion {} {name}: {} ({}; {:.1}s of {}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
