//! Label assignment for anchor-based object detection.
//!
//! * [`geometry`]: boxes, IoU, delta coding, NMS.
//! * [`anchors`]: feature-pyramid anchor grids.
//! * [`assignment`]: fixed-threshold, ATSS and Dynamic ATSS assigners.
//! * [`losses`]: focal / quality focal / varifocal losses with analytic
//!   derivatives, quality targets, smooth-L1.
//! * [`simulator`]: a seeded toy training loop for watching assignment
//!   dynamics without a CNN.
//! * [`oracle`]: brute-force reference implementations for testing.
//! * [`cli`]: the `assign` / `simulate` / `compare` / `oracle-check` commands.
//!
//! See the crate's `examples/` directory for runnable walkthroughs.

pub mod anchors;
pub mod assignment;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod oracle;
pub mod simulator;

pub use anchors::{generate_anchors, AnchorConfig, AnchorSet};
pub use assignment::{
    assign, assign_atss, assign_dynamic_atss, assign_fixed, AssignerConfig, AssignerKind, Assignment, Label, Schedule,
};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use geometry::{BBox, Deltas, Point};
