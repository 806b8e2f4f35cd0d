//! Small fully-convolutional network with hypercolumn heads.

mod config;
mod hypercolumn;
mod model;
mod predict;
mod rebalance;
mod train;

pub use config::{HeadKind, HeadSpec, LayerSpec, NetConfig, DATA_TAP};
pub use hypercolumn::{bilinear_weights, gather_hypercolumn, gather_with, scatter_with, Stencil};
pub use model::{init_model, softmax, FeatureMap, Features, Model, Param};
pub use predict::{predict_field, predict_outputs};
pub use rebalance::{activation_second_moments, rebalance, rebalance_factor};
pub use train::{
    activation_pattern, batch_loss, compute_gradients, sample_locations, sample_loss, sample_targets, train_step,
    SampleTargets, TrainingExample,
};
