use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use qtomo_core::design::Selector;
use qtomo_core::qubit::MeasurementConfig;
use qtomo_core::{
    info_gain, Apparatus, FilterConfig, NoiseModel, Posterior, PriorKind, QubitState, Strategy,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A posterior that has absorbed `n` random single-shot measurements.
fn trained(n: usize) -> Posterior {
    let truth = QubitState::pure([0.2, -0.4, 0.9]).unwrap();
    let mut app = Apparatus::new(truth, NoiseModel::ideal(), 1).unwrap();
    let mut post = Posterior::init(PriorKind::BuresHaar, FilterConfig::default(), 2).unwrap();
    let selector = Selector::new(Strategy::Random, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for step in 0..n as u64 {
        let cfg = selector
            .select_measurement(&post, &NoiseModel::ideal(), step, &mut rng)
            .unwrap();
        let counts = app.draw_block(&cfg, 1).unwrap();
        post.update(&cfg, &counts, &NoiseModel::ideal()).unwrap();
    }
    post
}

fn benches(c: &mut Criterion) {
    let post = trained(500);
    let noise = NoiseModel::ideal();
    let axis = MeasurementConfig::from_axis([0.3, 0.1, 0.95]).unwrap();

    c.bench_function("info_gain/S=1000", |b| {
        b.iter(|| info_gain(&post, &axis, &noise).unwrap())
    });

    let adaptive = Selector::new(Strategy::adaptive(), None).unwrap();
    c.bench_function("select/adaptive", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        b.iter(|| {
            adaptive
                .select_measurement(&post, &noise, 0, &mut rng)
                .unwrap()
        })
    });

    let counts = qtomo_core::OutcomeCounts::binary(1, 0);
    c.bench_function("reweight/S=1000", |b| {
        b.iter_batched(
            || post.clone(),
            |mut p| p.reweight(&axis, &counts, &noise).unwrap(),
            BatchSize::SmallInput,
        )
    });

    c.bench_function("resample_move/n=500", |b| {
        b.iter_batched(
            || post.clone(),
            |mut p| p.resample_move(&noise).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group! {
    name = filter;
    config = Criterion::default().sample_size(10);
    targets = benches
}
criterion_main!(filter);
