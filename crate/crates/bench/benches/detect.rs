use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use elt_core::detector::{detect, DetectorConfig};
use elt_core::eval::{generate_synthetic, SyntheticSpec};
use elt_core::schema::parse_schema;

fn detect_frame(c: &mut Criterion) {
    let catalog = parse_schema(include_str!("../../core/schemas/pressure_test.elt")).unwrap();
    let sample = generate_synthetic(&SyntheticSpec {
        seed: 3,
        n_samples: 1,
        ..SyntheticSpec::default()
    })
    .unwrap()
    .remove(0);
    let config = DetectorConfig::default();

    let mut g = c.benchmark_group("detect");
    g.sample_size(10);
    g.bench_function("synthetic_frame", |b| {
        b.iter(|| detect(black_box(&sample.frame), &catalog, &config).unwrap())
    });
    g.finish();
}

criterion_group!(benches, detect_frame);
criterion_main!(benches);
