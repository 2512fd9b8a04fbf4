//! Paired-box multi-object tracking.
//!
//! A tracker works on *chain nodes*: two adjacent frames processed jointly,
//! each producing box pairs (one box per frame for the same target). Nodes are
//! linked by IoU matching of overlapping frames, with a short constant-velocity
//! retention window to bridge missed detections.
//!
//! The crate covers the numeric side of that pipeline:
//!
//! * [`geometry`] box overlap and paired offset encoding
//! * [`anchors`] chained-anchor grids and k-means scale selection
//! * [`supervision`] label assignment, losses and their analytic gradients
//! * [`postprocess`] score-map attention, soft-NMS and confidence filtering
//! * [`chaining`] Kuhn–Munkres assignment and the node-chaining tracker
//! * [`simulator`] a deterministic synthetic world standing in for a detector
//! * [`metrics`] CLEAR-MOT, IDF1, MT/ML and table aggregation
//! * [`motio`] MOTChallenge-style text formats
//! * [`cli`] the `chainflow` command-line front end
//!
//! Core math is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`, which is what the I/O layer and simulator use.

pub mod anchors;
pub mod chaining;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod motio;
pub mod postprocess;
pub mod scalar;
pub mod simulator;
pub mod supervision;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type BBox = geometry::BBox<f64>;
pub type BBox32 = geometry::BBox<f32>;
pub type OffsetQuad = geometry::OffsetQuad<f64>;
pub type ChainedAnchor = anchors::ChainedAnchor<f64>;
pub type AnchorConfig = anchors::AnchorConfig<f64>;
pub type BoxPair = postprocess::BoxPair<f64>;
pub type ScoreGrid = postprocess::ScoreGrid<f64>;
pub type GroundTruthFrame = supervision::GroundTruthFrame<f64>;
pub type AnchorLabels = supervision::AnchorLabels<f64>;
pub type Node = chaining::Node<f64>;
pub type Tracklet = chaining::Tracklet<f64>;
pub type TrackerParams = chaining::TrackerParams<f64>;
pub type Trajectories = chaining::Trajectories<f64>;
