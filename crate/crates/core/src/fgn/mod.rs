//! Feature graph grains and the per-shard networks trained on them.

pub mod checkpoint;
pub mod grain;
pub mod gradcheck;
pub mod model;
pub mod reduce;
pub mod train;

pub use grain::{build_grain, feature_grain, sgnroot, Attention, FeatureGrain, Grain};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{argmax, Dims, Params, SubModel};
pub use reduce::{reduce_features, FeatureSelector};
pub use train::{accuracy, incremental_step, predict, train, TrainOptions, TrainReport};
