//! The recommender model: geometry backend, parameters, forward pass,
//! and Riemannian training.

pub mod forward;
pub mod geometry;
pub mod params;
pub mod train;

pub use forward::{ForwardCfg, ModelContext, PROB_EPS};
pub use geometry::{Backend, Geometry, LEAKY_SLOPE};
pub use params::{
    init_params, load_checkpoint, save_checkpoint, Ablation, Checkpoint, HyperParams, ModelError,
    ModelParams, ParamKind, CHECKPOINT_VERSION,
};
pub use train::{train, EpochMetrics, StopReason, TrainOutcome};
