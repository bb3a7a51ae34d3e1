use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pathwise::distributions::{Density, MixtureFamily};
use pathwise::estimators::{pathwise_grad, TestFunction};
use pathwise::fields::{FieldProvider, MixtureFieldOptions, MixtureFields};
use pathwise::instances::sphere_mixture;
use pathwise::montecarlo::{run_chunked, Execution};
use pathwise::numerics::RngStream;

fn mixture_logit_gradients(c: &mut Criterion) {
    let mut rng = RngStream::new(7, 0);
    let q = sphere_mixture(MixtureFamily::DiagNormals, 10, 20, &mut rng).unwrap();
    let f = TestFunction::sq_norm(20).unwrap();
    let prov = MixtureFields::new(q.clone(), MixtureFieldOptions::default()).unwrap();
    let p = prov.coordinates().len();
    let mut group = c.benchmark_group("mixture_pathwise_20k");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                let m = run_chunked(20_000, p, 1, 0, 1000, exec, |rng| pathwise_grad(&prov, &f, &q.sample(rng).value)).unwrap();
                black_box(m.total().mean())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, mixture_logit_gradients);
criterion_main!(benches);
