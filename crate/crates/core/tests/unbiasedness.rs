use nalgebra::{DMatrix, DVector};
use pathwise::distributions::{Density, DiagNormals, MixtureFamily, MixtureParams};
use pathwise::estimators::{
    gumbel_softmax_grad, hybrid_grad, pathwise_grad, score_grad, GumbelConfig, GumbelMode, TestFunction, TestFunctionKind,
};
use pathwise::fields::{AvfParams, EllipticalFields, MixtureFieldOptions, MixtureFields};
use pathwise::instances::{random_mixture, random_mvn, random_student_t};
use pathwise::montecarlo::{run_chunked, Execution, DEFAULT_CHUNK_SIZE};
use pathwise::numerics::RngStream;
use pathwise::verification::{analytic_grad_oracle, unbiasedness_ztest, ztest_from_moments, ZTestReport, Z_THRESHOLD};

const N: usize = 200_000;

fn assert_all_pass(label: &str, reports: &[ZTestReport]) {
    let bad: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    assert!(bad.is_empty(), "{label}: {} of {} fail, first {:?}", bad.len(), reports.len(), bad.first());
}

#[test]
fn mvn_reference_and_adaptive_pathwise() {
    let mut rng = RngStream::new(400, 0);
    for d in [2, 5, 10] {
        let q = random_mvn(d, &mut rng).unwrap();
        let f = TestFunction::synthetic(TestFunctionKind::Quadratic, d, &mut rng).unwrap();
        for avf in [None, Some(AvfParams::random(2, d, 0.5, &mut rng).unwrap())] {
            let prov = EllipticalFields::from_mvn(&q, avf).unwrap();
            let r = unbiasedness_ztest(|s| pathwise_grad(&prov, &f, &s.value), &q, &f, N, d as u64, Execution::Parallel).unwrap();
            assert_all_pass(&format!("MVN D={d}"), &r);
        }
    }
}

#[test]
fn student_t_adaptive_pathwise() {
    let mut rng = RngStream::new(401, 0);
    let t = random_student_t(4, 10.0, &mut rng).unwrap();
    let f = TestFunction::synthetic(TestFunctionKind::Quadratic, 4, &mut rng).unwrap();
    let prov = EllipticalFields::from_student_t(&t, Some(AvfParams::random(1, 4, 0.5, &mut rng).unwrap())).unwrap();
    let r = unbiasedness_ztest(|s| pathwise_grad(&prov, &f, &s.value), &t, &f, N, 7, Execution::Parallel).unwrap();
    assert_all_pass("Student-t", &r);
}

#[test]
fn mixture_pathwise_score_and_hybrid() {
    let mut rng = RngStream::new(402, 0);
    for family in MixtureFamily::ALL {
        for (k, d) in [(1, 3), (2, 2), (5, 5)] {
            let q = random_mixture(family, k, d, &mut rng).unwrap();
            let f = TestFunction::synthetic(TestFunctionKind::Quadratic, d, &mut rng).unwrap();
            let prov = MixtureFields::new(q.clone(), MixtureFieldOptions::default()).unwrap();
            let seed = (k * 100 + d) as u64;
            let label = format!("{family:?} K={k} D={d}");
            let r = unbiasedness_ztest(|s| pathwise_grad(&prov, &f, &s.value), &q, &f, N, seed, Execution::Parallel).unwrap();
            assert_all_pass(&format!("pathwise {label}"), &r);
            let r = unbiasedness_ztest(|s| Ok(score_grad(&q, &f, s)), &q, &f, N, seed + 1, Execution::Parallel).unwrap();
            assert_all_pass(&format!("score {label}"), &r);
            let r = unbiasedness_ztest(|s| hybrid_grad(&q, &f, s), &q, &f, N, seed + 2, Execution::Parallel).unwrap();
            assert_all_pass(&format!("hybrid {label}"), &r);
        }
    }
}

#[test]
fn oracle_matches_score_monte_carlo_for_gsm() {
    let mut rng = RngStream::new(403, 0);
    let q = random_mixture(MixtureFamily::Gsm, 3, 3, &mut rng).unwrap();
    let f = TestFunction::sq_norm(3).unwrap();
    let r = unbiasedness_ztest(|s| Ok(score_grad(&q, &f, s)), &q, &f, 1_000_000, 11, Execution::Parallel).unwrap();
    assert_all_pass("score GSM", &r);
}

#[test]
fn gumbel_softmax_logit_gradient_is_measurably_biased() {
    let q: MixtureParams = DiagNormals::new(
        DVector::from_vec(vec![0.4, -0.4]),
        DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.5, 0.5]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.7, 1.2]),
    )
    .unwrap()
    .into();
    let f = TestFunction::sq_norm(2).unwrap();
    let cfg = GumbelConfig::new(1.0, GumbelMode::Soft).unwrap();
    let oracle = analytic_grad_oracle(&q, &f).unwrap();
    let coords = q.coordinates();
    let m = run_chunked(400_000, coords.len(), 12, 0, DEFAULT_CHUNK_SIZE, Execution::Parallel, |rng| {
        Ok(gumbel_softmax_grad(&q, &f, cfg, rng)?.1)
    })
    .unwrap()
    .total();
    let r = ztest_from_moments(&coords, &m, &oracle, Z_THRESHOLD).unwrap();
    assert!(r.iter().filter(|x| x.coordinate.is_logit()).any(|x| !x.pass), "{r:?}");
}
