//! Attribute prediction: vertical size, elevation and orientation of each
//! instance from the map and its mask, plus heuristic baselines.

pub mod attention;
mod heuristics;
mod model;
mod train;

pub use attention::{cross_attention, AttentionWeights, Tokens};
pub use heuristics::{
    heuristic_orientation, heuristic_vertical, inward_orientation, snap_direction, HeuristicKind,
    OrientationStats, VerticalPriors,
};
pub use model::{
    pool_layout, pool_mask, ApmCache, ApmConfig, ApmLoss, ApmModel, AttributePrediction, AttributeTarget,
    MIN_HEIGHT,
};
pub use train::{
    orientation_accuracy, train_apm, ApmCheckpoint, ApmLogRecord, ApmSample, ApmTrainConfig, TrainedApm,
    APM_CHECKPOINT_VERSION,
};
