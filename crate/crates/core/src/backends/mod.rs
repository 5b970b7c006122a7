//! Rendering backends: the analytic oracle, its degraded variant, and the
//! trainable voxel radiance field.

mod degrade;
mod scene;
mod voxel;

pub use degrade::{degraded_render, DegradationSpec, DegradedOracle, DegradedRender, Region};
pub use scene::{presets, AnalyticScene, Checker, Hit, Light, Primitive, Shape};
pub use voxel::{
    composite, sigmoid, softplus, train, Activated, Composite, RaySample, TrainConfig, TrainRay, VoxelBackend,
    VoxelField,
};

use crate::error::Result;
use crate::geometry::{DepthMap, ImageBuffer, View};

/// A rendered color image and planar depth map for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub image: ImageBuffer,
    pub depth: DepthMap,
}

/// Anything that renders an image and a depth map for a posed camera.
/// Rendering must be deterministic given the backend state.
pub trait RenderingBackend: Send + Sync {
    fn render(&self, view: &View) -> Rendering;

    fn can_render_image(&self) -> bool {
        true
    }

    fn can_render_depth(&self) -> bool {
        true
    }
}

/// A supervising image for one view.
#[derive(Debug, Clone)]
pub struct TrainingImage {
    pub view: View,
    pub image: ImageBuffer,
}

/// A backend that can be fitted to posed images. Fixed backends (the
/// oracles) implement `fit` as a no-op.
pub trait TrainableBackend: RenderingBackend {
    /// Run `steps` optimization steps; returns the per-step loss.
    fn fit(&mut self, data: &[TrainingImage], steps: usize, seed: u64) -> Result<Vec<f64>>;

    /// Restore the initial state.
    fn reset(&mut self);
}

impl TrainableBackend for AnalyticScene {
    fn fit(&mut self, _: &[TrainingImage], _: usize, _: u64) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    fn reset(&mut self) {}
}

impl TrainableBackend for DegradedOracle {
    fn fit(&mut self, _: &[TrainingImage], _: usize, _: u64) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    fn reset(&mut self) {}
}
