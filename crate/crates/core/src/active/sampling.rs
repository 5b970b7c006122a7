//! Candidate camera layouts looking at a common point.

use nalgebra::Vector3;

use crate::error::Result;
use crate::geometry::{Intrinsics, Pose, View};

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653; // pi * (3 - sqrt(5))

/// `count` cameras on a Fibonacci sphere of `radius` about `center`, all
/// looking at `center` with world +z as up. `phase` rotates the spiral
/// about the z axis.
pub fn fibonacci_sphere(
    count: usize,
    radius: f64,
    center: Vector3<f64>,
    intrinsics: Intrinsics,
    prefix: &str,
    phase: f64,
) -> Result<Vec<View>> {
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = i as f64 * GOLDEN_ANGLE + phase;
            let dir = Vector3::new(r * phi.cos(), r * phi.sin(), z);
            let pose = Pose::look_at(center + dir * radius, center, Vector3::z())?;
            View::new(format!("{prefix}{i:03}"), intrinsics, pose)
        })
        .collect()
}

/// Fibonacci-sphere directions with camera distances spread over
/// `[radius_min, radius_max]` by a low-discrepancy sequence decorrelated
/// from the spiral.
pub fn fibonacci_shell(
    count: usize,
    radius_min: f64,
    radius_max: f64,
    center: Vector3<f64>,
    intrinsics: Intrinsics,
    prefix: &str,
    phase: f64,
) -> Result<Vec<View>> {
    let unit = fibonacci_sphere(count, 1.0, center, intrinsics, prefix, phase)?;
    Ok(unit
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let u = ((i as f64 + 0.5) * std::f64::consts::SQRT_2).fract();
            let r = radius_min + (radius_max - radius_min) * u;
            let pose = Pose::new(v.pose.rotation, center + (v.center() - center) * r).expect("rotation unchanged");
            v.with_pose(pose)
        })
        .collect())
}

/// `count` cameras evenly spaced in azimuth at a fixed `elevation` (radians).
pub fn ring(
    count: usize,
    radius: f64,
    elevation: f64,
    center: Vector3<f64>,
    intrinsics: Intrinsics,
    prefix: &str,
    phase: f64,
) -> Result<Vec<View>> {
    (0..count)
        .map(|i| {
            let az = phase + std::f64::consts::TAU * i as f64 / count as f64;
            let dir = Vector3::new(elevation.cos() * az.cos(), elevation.cos() * az.sin(), elevation.sin());
            let pose = Pose::look_at(center + dir * radius, center, Vector3::z())?;
            View::new(format!("{prefix}{i:03}"), intrinsics, pose)
        })
        .collect()
}

/// Indices of `k` views spread over `views` by greedy farthest-point
/// selection on camera centers, starting from index 0.
pub fn spread_subset(views: &[View], k: usize) -> Vec<usize> {
    if views.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut chosen = vec![0usize];
    while chosen.len() < k.min(views.len()) {
        let next = (0..views.len())
            .filter(|i| !chosen.contains(i))
            .map(|i| {
                let d = chosen
                    .iter()
                    .map(|&c| (views[i].center() - views[c].center()).norm())
                    .fold(f64::INFINITY, f64::min);
                (i, d)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("non-empty remainder");
        chosen.push(next);
    }
    chosen
}
