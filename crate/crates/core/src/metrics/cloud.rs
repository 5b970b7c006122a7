//! Point-cloud reconstruction metrics: accuracy, completion, completion
//! ratio, and F1 at a distance threshold.

use std::collections::HashMap;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{unproject, DepthMap, View};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(invalid("points", "all coordinates must be finite"));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Back-project every valid depth pixel of `view`.
    pub fn from_depth(depth: &DepthMap, view: &View) -> Self {
        let w = depth.width;
        let points = (0..depth.len())
            .filter(|&i| depth.valid[i])
            .filter_map(|i| unproject(Vector2::new((i % w) as f64, (i / w) as f64), depth.values[i], view).ok())
            .collect();
        Self { points }
    }

    pub fn extend(&mut self, other: PointCloud) {
        self.points.extend(other.points);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudMetrics {
    pub accuracy: f64,
    pub completion: f64,
    pub completion_ratio: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn dist(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm()
}

/// Nearest-neighbor distance by exhaustive search.
pub fn nearest_brute_force(points: &[Vector3<f64>], q: &Vector3<f64>) -> f64 {
    points.iter().map(|p| dist(p, q)).fold(f64::INFINITY, f64::min)
}

const BRUTE_FORCE_BELOW: usize = 32;
const MAX_SHELLS: i64 = 48;

/// Uniform hash grid for exact nearest-neighbor queries.
pub struct HashGrid<'a> {
    points: &'a [Vector3<f64>],
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl<'a> HashGrid<'a> {
    pub fn new(points: &'a [Vector3<f64>]) -> Self {
        let mut min = Vector3::repeat(f64::INFINITY);
        let mut max = Vector3::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        let extent = (max - min).max().max(1e-9);
        let cell = (extent / (points.len() as f64).cbrt()).max(1e-9);
        let mut grid = Self {
            points,
            cell,
            cells: HashMap::new(),
            lo: [i64::MAX; 3],
            hi: [i64::MIN; 3],
        };
        for (i, p) in points.iter().enumerate() {
            let k = grid.key(p);
            for a in 0..3 {
                grid.lo[a] = grid.lo[a].min(k[a]);
                grid.hi[a] = grid.hi[a].max(k[a]);
            }
            grid.cells.entry(k).or_default().push(i);
        }
        grid
    }

    fn key(&self, p: &Vector3<f64>) -> [i64; 3] {
        std::array::from_fn(|a| (p[a] / self.cell).floor() as i64)
    }

    /// Exact nearest-neighbor distance. Falls back to brute force for tiny
    /// clouds and for queries far outside the occupied cells.
    pub fn nearest(&self, q: &Vector3<f64>) -> f64 {
        if self.points.len() < BRUTE_FORCE_BELOW {
            return nearest_brute_force(self.points, q);
        }
        let c = self.key(q);
        let reach = (0..3)
            .map(|a| (c[a] - self.lo[a]).abs().max((self.hi[a] - c[a]).abs()))
            .max()
            .unwrap_or(0);
        let mut best = f64::INFINITY;
        for r in 0..=reach {
            if r > MAX_SHELLS {
                return nearest_brute_force(self.points, q);
            }
            self.visit_shell(c, r, |i| best = best.min(dist(&self.points[i], q)));
            // every point in shell r+1 or beyond is at least r cells away
            if best <= r as f64 * self.cell {
                break;
            }
        }
        best
    }

    fn visit_shell(&self, c: [i64; 3], r: i64, mut f: impl FnMut(usize)) {
        let range = |a: usize| (c[a] - r).max(self.lo[a])..=(c[a] + r).min(self.hi[a]);
        for x in range(0) {
            for y in range(1) {
                for z in range(2) {
                    let on_shell = (x - c[0]).abs() == r || (y - c[1]).abs() == r || (z - c[2]).abs() == r;
                    if !on_shell {
                        continue;
                    }
                    if let Some(ids) = self.cells.get(&[x, y, z]) {
                        ids.iter().for_each(|&i| f(i));
                    }
                }
            }
        }
    }
}

fn summarize(d_pred: &[f64], d_gt: &[f64], threshold: f64) -> CloudMetrics {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let frac = |v: &[f64]| v.iter().filter(|&&d| d < threshold).count() as f64 / v.len() as f64;
    let precision = frac(d_pred);
    let recall = frac(d_gt);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    CloudMetrics {
        accuracy: mean(d_pred),
        completion: mean(d_gt),
        completion_ratio: recall,
        precision,
        recall,
        f1,
    }
}

fn check(pred: &PointCloud, gt: &PointCloud, threshold: f64) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::Empty("predicted point cloud"));
    }
    if gt.is_empty() {
        return Err(Error::Empty("ground-truth point cloud"));
    }
    if !(threshold > 0.0) {
        return Err(invalid("threshold", "must be positive"));
    }
    Ok(())
}

pub fn cloud_metrics(pred: &PointCloud, gt: &PointCloud, threshold: f64) -> Result<CloudMetrics> {
    check(pred, gt, threshold)?;
    let gt_grid = HashGrid::new(&gt.points);
    let pred_grid = HashGrid::new(&pred.points);
    let d_pred: Vec<f64> = pred.points.iter().map(|p| gt_grid.nearest(p)).collect();
    let d_gt: Vec<f64> = gt.points.iter().map(|p| pred_grid.nearest(p)).collect();
    Ok(summarize(&d_pred, &d_gt, threshold))
}

/// O(n·m) reference implementation.
pub fn cloud_metrics_brute_force(pred: &PointCloud, gt: &PointCloud, threshold: f64) -> Result<CloudMetrics> {
    check(pred, gt, threshold)?;
    let d_pred: Vec<f64> = pred.points.iter().map(|p| nearest_brute_force(&gt.points, p)).collect();
    let d_gt: Vec<f64> = gt.points.iter().map(|p| nearest_brute_force(&pred.points, p)).collect();
    Ok(summarize(&d_pred, &d_gt, threshold))
}
