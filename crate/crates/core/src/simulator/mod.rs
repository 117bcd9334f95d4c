//! Deterministic toy training loop.
//!
//! Every anchor owns its own regression deltas, class logits and quality
//! logit, trained by plain gradient descent on synthetic scenes. Deltas
//! start at zero, so predictions coincide with the anchors at iteration 0.

mod scene;
mod train;

pub use scene::{generate_scene, generate_scenes, scene_hash, GroundTruth, SceneSpec, SLENDER_ASPECT};
pub use train::{
    run_on_scenes, run_simulation, train_step, window_means, MetricsRecord, SimState, SimulationRun, WindowMeans,
    INIT_CLASS_LOGIT, METRICS_HEADER,
};
