use criterion::{criterion_group, criterion_main, Criterion};
use grainmem_bench::{desk_graph, grains, model};
use grainmem_core::fgn::model::{forward, loss_and_grad};
use grainmem_core::fgn::{train, TrainOptions};
use std::hint::black_box;

fn fgn(c: &mut Criterion) {
    let g = desk_graph(100);
    let gs = grains(&g, 40, 10);
    let m = model(&g, 16);

    c.bench_function("forward", |b| b.iter(|| forward(&m.dims, &m.params, black_box(&gs[0]))));
    c.bench_function("loss_and_grad", |b| b.iter(|| loss_and_grad(&m, black_box(&gs[0]), true).unwrap()));

    let opts = TrainOptions {
        epochs: 5,
        ..TrainOptions::default()
    };
    c.bench_function("train_40x5", |b| {
        b.iter(|| {
            let mut m = m.clone();
            train(&mut m, black_box(&gs), &[], &opts).unwrap()
        })
    });
}

criterion_group!(benches, fgn);
criterion_main!(benches);
