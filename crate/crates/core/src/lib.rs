//! Space-time novel view synthesis from a monocular video bundle with
//! precomputed per-frame priors (depth, optical flow, dynamic masks, and
//! optional point tracks). Dynamic content is lifted into flow-paired point
//! clouds, moved to the target time under a linear motion model, and
//! rasterized; static content comes from aggregated static point clouds or
//! a toy epipolar feature aggregator; the two branches are composited per
//! pixel. An analytic synthetic scene provides exact ground truth for
//! verification.

pub mod dynamic;
pub mod error;
pub mod geometry;
pub mod mask_pipeline;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod scene_io;
pub mod static_render;
pub mod synthetic;
pub mod tracks;

pub use error::{Error, Result};
