use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use most_core::eba::foreground_tokens;
use most_core::fixtures::{blob_fixture, noise_map, two_blobs, Blob};
use most_core::similarity::outer_product;
use most_core::{localize_image, EbaConfig, LocalizeConfig};

fn similarity(c: &mut Criterion) {
    let mut group = c.benchmark_group("outer_product");
    for side in [14usize, 28] {
        let map = noise_map(side, side, 384, 1);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{side}x{side}x384")), &map, |b, m| {
            b.iter(|| outer_product(black_box(m)))
        });
    }
    group.finish();
}

fn entropy_vote(c: &mut Criterion) {
    let cfg = EbaConfig::default();
    let mut group = c.benchmark_group("foreground_tokens");
    for side in [14usize, 28] {
        let map = noise_map(side, side, 64, 2);
        let a = outer_product(&map);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{side}x{side}")), &a, |b, a| {
            b.iter(|| foreground_tokens(black_box(a), side, side, &cfg))
        });
    }
    group.finish();
}

fn full_image(c: &mut Criterion) {
    let cfg = LocalizeConfig::default();
    let small = two_blobs();
    let large = blob_fixture(
        28,
        28,
        8,
        None,
        &[Blob { row: 3, col: 2, rows: 8, cols: 6 }, Blob { row: 15, col: 14, rows: 9, cols: 10 }],
        64,
        3,
    );
    let mut group = c.benchmark_group("localize_image");
    group.bench_function("14x14 two blobs", |b| b.iter(|| localize_image(black_box(&small.map), &cfg)));
    group.bench_function("28x28 two blobs", |b| b.iter(|| localize_image(black_box(&large.map), &cfg)));
    group.finish();
}

criterion_group!(benches, similarity, entropy_vote, full_image);
criterion_main!(benches);
