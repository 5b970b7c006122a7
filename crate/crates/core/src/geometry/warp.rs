//! Backward warping of rendered depth and color between posed views.
//!
//! For every target pixel with a valid depth, the pixel is lifted to world
//! space, projected into the source view, and the source buffer is sampled
//! bilinearly there. Depth warps additionally lift the sampled source depth
//! back to 3D and re-express it as a target-frame z so that the result is
//! directly comparable with the target depth.

use nalgebra::Vector2;
use rayon::prelude::*;

use super::buffers::{check_same_size, DepthMap, ImageBuffer, Rgb};
use super::camera::{project, unproject, View};
use crate::error::Result;

/// Where a target pixel lands in the source view, if anywhere usable.
fn correspondence(target: &View, target_depth: &DepthMap, idx: usize, source: &View) -> Option<Vector2<f64>> {
    if !target_depth.valid[idx] {
        return None;
    }
    let w = target.width();
    let p = Vector2::new((idx % w) as f64, (idx / w) as f64);
    let x = unproject(p, target_depth.values[idx], target).ok()?;
    let (q, z_src) = project(&x, source);
    // z <= 0: behind the source camera; non-finite pixels fail the bounds test.
    (z_src > 0.0 && source.intrinsics.in_bounds(q)).then_some(q)
}

fn warp_depth_pixel(
    source: &View,
    source_depth: &DepthMap,
    target: &View,
    target_depth: &DepthMap,
    idx: usize,
) -> Option<f64> {
    let q = correspondence(target, target_depth, idx, source)?;
    let d_s = source_depth.sample(q)?;
    let x_s = unproject(q, d_s, source).ok()?;
    let z = target.pose.world_to_camera(&x_s).z;
    // negative-depth exclusion
    (z > 0.0 && z.is_finite()).then_some(z)
}

/// Source depth resampled into the target view, expressed as target-frame z.
pub fn warp_depth(source: (&View, &DepthMap), target: (&View, &DepthMap)) -> Result<DepthMap> {
    let (sv, sd) = source;
    let (tv, td) = target;
    check_same_size((sv.width(), sv.height()), (sd.width, sd.height))?;
    check_same_size((tv.width(), tv.height()), (td.width, td.height))?;
    let out: Vec<Option<f64>> = (0..td.len())
        .into_par_iter()
        .map(|i| warp_depth_pixel(sv, sd, tv, td, i))
        .collect();
    let mut warped = DepthMap::invalid(td.width, td.height);
    for (i, v) in out.into_iter().enumerate() {
        if let Some(z) = v {
            warped.set(i, z);
        }
    }
    Ok(warped)
}

/// Source image resampled into the target view through the target depth.
pub fn warp_image(source: (&View, &ImageBuffer), target: (&View, &DepthMap)) -> Result<ImageBuffer> {
    let (sv, si) = source;
    let (tv, td) = target;
    check_same_size((sv.width(), sv.height()), (si.width, si.height))?;
    check_same_size((tv.width(), tv.height()), (td.width, td.height))?;
    let out: Vec<Option<Rgb>> = (0..td.len())
        .into_par_iter()
        .map(|i| correspondence(tv, td, i, sv).and_then(|q| si.sample(q)))
        .collect();
    let mut warped = ImageBuffer::invalid(td.width, td.height);
    for (i, v) in out.into_iter().enumerate() {
        if let Some(c) = v {
            warped.set(i, c);
        }
    }
    Ok(warped)
}
