//! Balanced two-level sharding of the graph.

pub mod bekm;
pub mod blpa;
pub mod embed;
pub mod hierarchy;

pub use bekm::{bekm_from, centroid, partition_bekm};
pub use blpa::{blpa_from, initial_assignment, partition_blpa};
pub use embed::{embed_nodes, EmbeddingIndex, Projection};
pub use hierarchy::{build_hierarchy, build_hierarchy_over, default_cap, Method, PartitionHierarchy, PartitionParams, Shard};
