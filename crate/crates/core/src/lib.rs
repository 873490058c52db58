//! Sharded feature-graph ensembles over evolving graphs, with exact
//! unlearning by scratch retraining and single-pass incremental learning.

pub mod engine;
pub mod ensemble;
pub mod error;
pub mod fgn;
pub mod graph;
pub mod harness;
pub mod io;
pub mod partition;
pub mod rng;
pub mod sbm;
pub mod split;

pub use error::{Error, Result};
pub use graph::{GraphStore, NewNode, NodeId, TimelineEvent};
