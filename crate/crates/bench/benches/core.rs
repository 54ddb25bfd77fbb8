use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use gwlab::hausdorff::min_cover_cost;
use gwlab::tail::{empirical_tail, TailModel};
use gwlab::{offspring, Gauge, GwSampler, RngStream, WField};

fn sampling(c: &mut Criterion) {
    let d = offspring("0:0.25,2:0.75");
    let s = GwSampler::new(&d).unwrap().with_cap(u64::MAX);
    let mut rng = RngStream::new(1, 0).rng();
    c.bench_function("sample_gw xi_A depth 12", |b| {
        b.iter(|| s.sample_gw(black_box(12), &mut rng).unwrap())
    });
    c.bench_function("z_chain xi_A depth 20", |b| {
        b.iter(|| s.sample_z_chain(black_box(20), &mut rng).unwrap())
    });
    let g = offspring("geom:0.6666666666666666");
    let sg = GwSampler::new(&g).unwrap().with_cap(u64::MAX);
    c.bench_function("sample_w geometric depth 14", |b| {
        b.iter(|| sg.sample_w(black_box(14), &mut rng).unwrap())
    });
}

fn fields_and_covers(c: &mut Criterion) {
    let d = offspring("0:0.25,2:0.75");
    let s = GwSampler::new(&d).unwrap();
    let mut rng = RngStream::new(2, 0).rng();
    let tree = loop {
        let t = s.sample_gw(12, &mut rng).unwrap();
        if t.width(12) > 50 {
            break t;
        }
    };
    c.bench_function("w_field depth 12", |b| {
        b.iter(|| WField::new(black_box(&tree), 1.5).unwrap())
    });
    let tail: TailModel = empirical_tail(&d, 12, 20_000, 3, u64::MAX).unwrap().into();
    let gauge = Gauge::hawkes(1.5, tail.clone()).unwrap();
    c.bench_function("min_cover_cost depth 12", |b| {
        b.iter(|| min_cover_cost(black_box(&tree), &gauge, 2).unwrap())
    });
    c.bench_function("tail inverse", |b| {
        b.iter_batched(
            || 3.7f64,
            |y| tail.inverse(black_box(y)).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, sampling, fields_and_covers);
criterion_main!(benches);
