//! Training-free uncertainty for radiance-field renderers, measured by
//! multi-view consistency of rendered depth and color.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: pinhole cameras, poses, and backward warping.
//! * [`backends`]: renderers behind [`backends::RenderingBackend`]; an
//!   analytic ray-traced oracle, a degraded oracle with known error, and a
//!   trainable voxel radiance field.
//! * [`uncertainty`]: per-pixel depth consistency and image-level color
//!   reprojection scores.
//! * [`metrics`]: sparsification/AUSE, PSNR, SSIM, depth MAE, and point
//!   cloud reconstruction metrics.
//! * [`active`]: candidate scoring, next-view selection, local pose
//!   refinement, and the active training loop.
//! * [`io`]: experiment configs, PFM/PPM files, checkpoints, and result logs.

// Validation compares with `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod active;
pub mod backends;
mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod selftest;
pub mod uncertainty;

pub use error::{Error, Result};
pub use geometry::{DepthMap, ImageBuffer, Intrinsics, Pose, Rgb, View};
