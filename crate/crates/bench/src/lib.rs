//! Shared fixtures for the benchmarks: the default three-block SBM and grains
//! built from it with graph-neighbor lists.

use grainmem_core::fgn::{Dims, FeatureSelector, Grain, SubModel};
use grainmem_core::partition::{embed_nodes, EmbeddingIndex};
use grainmem_core::sbm::{generate_sbm, SbmSpec};
use grainmem_core::GraphStore;

pub fn desk_graph(nodes_per_block: usize) -> GraphStore {
    generate_sbm(&SbmSpec {
        nodes_per_block,
        ..SbmSpec::default()
    })
    .expect("sbm fixture")
}

pub fn desk_embedding(graph: &GraphStore) -> EmbeddingIndex {
    embed_nodes(graph, 16, 11).expect("embedding fixture")
}

/// First `count` nodes as grains, each over at most `max_nbrs` graph neighbors.
pub fn grains(graph: &GraphStore, count: usize, max_nbrs: usize) -> Vec<Grain> {
    let sel = FeatureSelector::identity(graph.feature_dim(), graph.channels());
    graph
        .node_ids()
        .take(count)
        .map(|v| {
            let nbrs: Vec<_> = graph.neighbors(v).iter().copied().take(max_nbrs).collect();
            Grain::from_graph(graph, &sel, v, &nbrs).expect("grain fixture")
        })
        .collect()
}

pub fn model(graph: &GraphStore, hidden: usize) -> SubModel {
    let dims = Dims {
        feat: graph.feature_dim(),
        channels: graph.channels(),
        hidden,
        classes: graph.num_classes(),
    };
    SubModel::new(dims, 5)
}
