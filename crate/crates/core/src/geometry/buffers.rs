use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::camera::EDGE_SNAP;
use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

/// Planar (camera-z) depth in meters with a validity mask. Row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Self {
        Self {
            width,
            height,
            values: vec![depth; width * height],
            valid: vec![true; width * height],
        }
    }

    /// Build from raw values; entries that are non-finite or non-positive
    /// are marked invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Format(format!(
                "depth map expects {} values, got {}",
                width * height,
                values.len()
            )));
        }
        let valid = values.iter().map(|&d| d.is_finite() && d > 0.0).collect();
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn set(&mut self, idx: usize, depth: f64) {
        if depth.is_finite() && depth > 0.0 {
            self.values[idx] = depth;
            self.valid[idx] = true;
        } else {
            self.values[idx] = 0.0;
            self.valid[idx] = false;
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Bilinear sample over valid neighbors; see [`bilinear_weights`].
    pub fn sample(&self, at: Vector2<f64>) -> Option<f64> {
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (i, w) in bilinear_weights(self.width, self.height, at)?.into_iter().flatten() {
            if self.valid[i] {
                acc += w * self.values[i];
                wsum += w;
            }
        }
        (wsum > 0.0).then(|| acc / wsum)
    }
}

/// RGB image in [0, 1] with a validity mask. Row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub values: Vec<Rgb>,
    pub valid: Vec<bool>,
}

impl ImageBuffer {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Self {
            width,
            height,
            values: vec![color; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![[0.0; 3]; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn set(&mut self, idx: usize, color: Rgb) {
        self.values[idx] = color.map(|c| c.clamp(0.0, 1.0));
        self.valid[idx] = color.iter().all(|c| c.is_finite());
    }

    pub fn sample(&self, at: Vector2<f64>) -> Option<Rgb> {
        let mut acc = [0.0; 3];
        let mut wsum = 0.0;
        for (i, w) in bilinear_weights(self.width, self.height, at)?.into_iter().flatten() {
            if self.valid[i] {
                for (a, c) in acc.iter_mut().zip(self.values[i]) {
                    *a += w * c;
                }
                wsum += w;
            }
        }
        (wsum > 0.0).then(|| acc.map(|a| a / wsum))
    }
}

/// The up-to-four grid neighbors of a continuous position together with
/// their bilinear weights. Neighbors with zero weight are omitted, so a
/// sample exactly on a pixel center touches only that pixel. Returns `None`
/// when `at` lies outside `[0, W-1] x [0, H-1]` by more than [`EDGE_SNAP`].
pub fn bilinear_weights(width: usize, height: usize, at: Vector2<f64>) -> Option<[Option<(usize, f64)>; 4]> {
    let (xmax, ymax) = ((width - 1) as f64, (height - 1) as f64);
    let (x, y) = (at.x, at.y);
    if !(x >= -EDGE_SNAP && y >= -EDGE_SNAP && x <= xmax + EDGE_SNAP && y <= ymax + EDGE_SNAP) {
        return None;
    }
    let (x, y) = (x.clamp(0.0, xmax), y.clamp(0.0, ymax));
    let x0 = (x.floor() as usize).min(width - 1);
    let y0 = (y.floor() as usize).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let mut out = [None; 4];
    let corners = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    for (slot, (cx, cy, w)) in out.iter_mut().zip(corners) {
        if w > 0.0 && cx < width && cy < height {
            *slot = Some((cy * width + cx, w));
        }
    }
    Some(out)
}

pub(crate) fn check_same_size(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::ResolutionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            got_w: got.0,
            got_h: got.1,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sample_on_center_hits_single_pixel() {
        let mut d = DepthMap::constant(3, 3, 1.0);
        d.values[4] = 5.0;
        assert_eq!(d.sample(Vector2::new(1.0, 1.0)), Some(5.0));
        // far corner is in bounds
        assert_eq!(d.sample(Vector2::new(2.0, 2.0)), Some(1.0));
        assert_eq!(d.sample(Vector2::new(2.0001, 2.0)), None);
        assert_eq!(d.sample(Vector2::new(-0.0001, 0.0)), None);
    }

    #[test]
    fn invalid_neighbors_are_renormalized() {
        let mut d = DepthMap::constant(2, 2, 2.0);
        d.values[3] = 100.0;
        d.valid[3] = false;
        assert_eq!(d.sample(Vector2::new(0.5, 0.5)), Some(2.0));
        let none = DepthMap::invalid(2, 2);
        assert_eq!(none.sample(Vector2::new(0.5, 0.5)), None);
    }

    #[test]
    fn zero_weight_invalid_neighbor_does_not_leak() {
        let mut d = DepthMap::constant(2, 1, 3.0);
        d.valid[0] = false;
        // exactly on the invalid pixel: only it has positive weight
        assert_eq!(d.sample(Vector2::new(0.0, 0.0)), None);
    }

    proptest! {
        #[test]
        fn bilinear_stays_within_neighbor_range(
            vals in prop::collection::vec(0.1..10.0f64, 16),
            mask in prop::collection::vec(any::<bool>(), 16),
            x in 0.0..3.0f64,
            y in 0.0..3.0f64,
        ) {
            let mut d = DepthMap::from_values(4, 4, vals).unwrap();
            for (v, m) in d.valid.iter_mut().zip(&mask) {
                *v &= *m;
            }
            let at = Vector2::new(x, y);
            if let Some(s) = d.sample(at) {
                let neigh: Vec<f64> = bilinear_weights(4, 4, at).unwrap()
                    .into_iter().flatten()
                    .filter(|(i, _)| d.valid[*i])
                    .map(|(i, _)| d.values[i])
                    .collect();
                let lo = neigh.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = neigh.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(s >= lo - 1e-12 && s <= hi + 1e-12);
            }
        }
    }
}
