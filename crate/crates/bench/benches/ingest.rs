use criterion::{Criterion, Throughput, criterion_group, criterion_main};

use v6lens_bench::observation_log;
use v6lens_core::store::{IngestConfig, ingest};

fn bench_ingest(c: &mut Criterion) {
    let log = observation_log(100_000, 70_000, 5);
    let bytes = log.len() as u64;

    let mut group = c.benchmark_group("store");
    group.throughput(Throughput::Bytes(bytes));
    group.sample_size(20);

    group.bench_function("ingest_100k_in_memory", |b| {
        b.iter(|| {
            let dir = tempfile::tempdir().unwrap();
            let (store, _) = ingest(
                log.as_bytes(),
                dir.path().join("store"),
                &IngestConfig::default(),
            )
            .unwrap();
            store.counters.unique_addresses
        })
    });

    group.bench_function("ingest_100k_external_merge", |b| {
        b.iter(|| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = IngestConfig {
                max_in_memory: 10_000,
                tmp_dir: None,
            };
            let (store, _) = ingest(log.as_bytes(), dir.path().join("store"), &cfg).unwrap();
            store.counters.unique_addresses
        })
    });
    group.finish();
}

criterion_group!(benches, bench_ingest);
criterion_main!(benches);
