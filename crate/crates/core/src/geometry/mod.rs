//! Pinhole cameras, rigid poses, and backward warping.

mod buffers;
mod camera;
mod warp;

pub(crate) use buffers::check_same_size;
pub use buffers::{bilinear_weights, DepthMap, ImageBuffer, Rgb};
pub use camera::{project, unproject, Intrinsics, Pose, View, EDGE_SNAP};
pub use warp::{warp_depth, warp_image};
