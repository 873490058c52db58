use std::collections::BTreeSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use grainmem_bench::{desk_embedding, desk_graph};
use grainmem_core::partition::{default_cap, partition_bekm, partition_blpa};
use grainmem_core::NodeId;

fn partition(c: &mut Criterion) {
    let mut group = c.benchmark_group("partition");
    for per_block in [100, 400] {
        let g = desk_graph(per_block);
        let emb = desk_embedding(&g);
        let nodes: BTreeSet<NodeId> = g.node_ids().collect();
        let k = 6;
        let delta = default_cap(nodes.len(), k);
        group.bench_with_input(BenchmarkId::new("blpa", nodes.len()), &nodes, |b, n| {
            b.iter(|| partition_blpa(&g, n, k, delta, 1, 20).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("bekm", nodes.len()), &nodes, |b, n| {
            b.iter(|| partition_bekm(&emb, n, k, delta, 1, 20).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, partition);
criterion_main!(benches);
