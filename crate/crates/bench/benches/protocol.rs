use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pcr_bench::instance;
use pcr_core::schemes::retrieve_local;
use pcr_core::SchemeKind;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn retrieval(c: &mut Criterion) {
    let mut group = c.benchmark_group("retrieve_local");
    for (kind, weighted) in [
        (SchemeKind::Baseline, false),
        (SchemeKind::Diff, false),
        (SchemeKind::Mask, false),
        (SchemeKind::Baseline, true),
        (SchemeKind::Diff, true),
        (SchemeKind::Mask, true),
    ] {
        for m in [100, 1000] {
            let (config, db, input) = instance(kind, weighted, 32, 8, m, 4, 1);
            let id = format!("{}/m={m}", config.variant());
            let mut rng = ChaCha20Rng::seed_from_u64(2);
            group.bench_function(BenchmarkId::from_parameter(id), |b| {
                b.iter(|| retrieve_local(&config, &db, &input, &[7; 32], &[0; 16], &mut rng).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, retrieval);
criterion_main!(benches);
