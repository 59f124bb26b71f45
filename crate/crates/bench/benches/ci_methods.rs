use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rateci_core::{
    eb_ci, pb_ci, Backend, CiConfig, Method, NextWeightSpec, validate_weights, WeightSample,
};

fn sample(n: usize) -> WeightSample {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let weights: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(0.0..2.0f64))).collect();
    validate_weights(&weights).unwrap()
}

fn bench_methods(c: &mut Criterion) {
    let s = sample(40);
    let eb_sp = CiConfig::new(Method::Eb, 0.1)
        .unwrap()
        .with_backend(Backend::Saddlepoint)
        .with_next_weight(NextWeightSpec::max_observed());
    let eb_mc = CiConfig::new(Method::Eb, 0.1)
        .unwrap()
        .with_next_weight(NextWeightSpec::max_observed());
    let pb = CiConfig::new(Method::Pb, 0.1).unwrap();

    c.bench_function("eb_saddlepoint_40_events", |b| {
        b.iter(|| eb_ci(black_box(&s), black_box(&eb_sp)).unwrap())
    });
    c.bench_function("eb_monte_carlo_1e4_40_events", |b| {
        b.iter(|| eb_ci(black_box(&s), black_box(&eb_mc)).unwrap())
    });
    c.bench_function("pb_1e4_40_events", |b| {
        b.iter(|| pb_ci(black_box(&s), black_box(&pb)))
    });
}

criterion_group!(benches, bench_methods);
criterion_main!(benches);
