//! Oracle renders with injected, exactly known errors.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::scene::{rendering_from_hits, AnalyticScene, Hit};
use super::{Rendering, RenderingBackend};
use crate::error::{invalid, Result};
use crate::geometry::{Rgb, View};
use crate::rng::{label_hash, streams, CounterRng};

/// Where a degradation applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Everywhere,
    /// Image-space rectangle in fractions of width/height, half-open:
    /// `x0 <= x/W < x1` and `y0 <= y/H < y1`.
    ImageRect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    /// Surface points inside an axis-aligned world box.
    WorldBox {
        min: [f64; 3],
        max: [f64; 3],
    },
    /// Surface points whose azimuth about the world z axis through `center`
    /// lies in `[start, end)` radians (wrapping through ±π allowed).
    WorldSector {
        center: [f64; 3],
        start: f64,
        end: f64,
    },
}

impl Region {
    pub fn contains(&self, view: &View, idx: usize, point: &Vector3<f64>) -> bool {
        match self {
            Region::Everywhere => true,
            Region::ImageRect { x0, y0, x1, y1 } => {
                let fx = (idx % view.width()) as f64 / view.width() as f64;
                let fy = (idx / view.width()) as f64 / view.height() as f64;
                fx >= *x0 && fx < *x1 && fy >= *y0 && fy < *y1
            }
            Region::WorldBox { min, max } => (0..3).all(|k| point[k] >= min[k] && point[k] <= max[k]),
            Region::WorldSector { .. } => self.contains_point(point),
        }
    }

    /// World-space membership; image-space regions never match here.
    pub fn contains_point(&self, point: &Vector3<f64>) -> bool {
        match self {
            Region::Everywhere => true,
            Region::ImageRect { .. } => false,
            Region::WorldBox { min, max } => (0..3).all(|k| point[k] >= min[k] && point[k] <= max[k]),
            Region::WorldSector { center, start, end } => {
                let az = (point.y - center[1]).atan2(point.x - center[0]);
                let tau = std::f64::consts::TAU;
                let rel = (az - start).rem_euclid(tau);
                let span = (end - start).rem_euclid(tau);
                rel < span
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationSpec {
    pub region: Region,
    #[serde(default)]
    pub depth_bias: f64,
    #[serde(default)]
    pub depth_noise_sigma: f64,
    #[serde(default)]
    pub color_noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Restrict the degradation to these view ids; `None` applies to every view.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub views: Option<Vec<String>>,
    /// Primitives deleted from the scene (world-space degradation).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed_primitives: Vec<usize>,
}

impl DegradationSpec {
    pub fn none() -> Self {
        Self {
            region: Region::Everywhere,
            depth_bias: 0.0,
            depth_noise_sigma: 0.0,
            color_noise_sigma: 0.0,
            seed: 0,
            views: None,
            removed_primitives: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.depth_noise_sigma >= 0.0) {
            return Err(invalid("depth_noise_sigma", "must be non-negative"));
        }
        if !(self.color_noise_sigma >= 0.0) {
            return Err(invalid("color_noise_sigma", "must be non-negative"));
        }
        if !self.depth_bias.is_finite() {
            return Err(invalid("depth_bias", "must be finite"));
        }
        Ok(())
    }

    fn applies_to(&self, view: &View) -> bool {
        self.views.as_ref().is_none_or(|ids| ids.contains(&view.id))
    }
}

#[derive(Debug, Clone)]
pub struct DegradedRender {
    pub rendering: Rendering,
    /// Undegraded oracle depth for the same view.
    pub oracle: Rendering,
    /// `|degraded depth - oracle depth|` where both are valid, else 0.
    pub true_error: Vec<f64>,
    /// Pixels where `true_error` is defined.
    pub error_valid: Vec<bool>,
}

/// Render `view` with `spec` applied. Noise draws are keyed by
/// `(seed, view id, pixel)`, so repeated renders of a view agree.
pub fn degraded_render(scene: &AnalyticScene, spec: &DegradationSpec, view: &View) -> DegradedRender {
    let truth_hits = scene.hits(view, &|_| false);
    let oracle = rendering_from_hits(view, scene.background, &truth_hits);
    if !spec.applies_to(view) {
        let n = oracle.depth.len();
        return DegradedRender {
            rendering: oracle.clone(),
            error_valid: oracle.depth.valid.clone(),
            oracle,
            true_error: vec![0.0; n],
        };
    }

    let hits: Vec<Option<(Hit, Rgb)>> = if spec.removed_primitives.is_empty() {
        truth_hits
    } else {
        let removed = spec.removed_primitives.clone();
        scene.hits(view, &move |i| removed.contains(&i))
    };
    let mut rendering = rendering_from_hits(view, scene.background, &hits);

    let rng = CounterRng::new(spec.seed).derive(streams::DEPTH_NOISE, label_hash(&view.id));
    for (i, hit) in hits.iter().enumerate() {
        let Some((hit, _)) = hit else { continue };
        if !spec.region.contains(view, i, &hit.point) {
            continue;
        }
        if spec.depth_bias != 0.0 || spec.depth_noise_sigma > 0.0 {
            let noise = if spec.depth_noise_sigma > 0.0 {
                spec.depth_noise_sigma * rng.normal(streams::DEPTH_NOISE, i as u64)
            } else {
                0.0
            };
            rendering.depth.set(i, hit.t + spec.depth_bias + noise);
        }
        if spec.color_noise_sigma > 0.0 {
            let mut c = rendering.image.values[i];
            for (ch, v) in c.iter_mut().enumerate() {
                *v += spec.color_noise_sigma * rng.normal(streams::COLOR_NOISE, (i * 3 + ch) as u64);
            }
            rendering.image.set(i, c);
        }
    }

    let n = rendering.depth.len();
    let mut true_error = vec![0.0; n];
    let mut error_valid = vec![false; n];
    for i in 0..n {
        if rendering.depth.valid[i] && oracle.depth.valid[i] {
            true_error[i] = (rendering.depth.values[i] - oracle.depth.values[i]).abs();
            error_valid[i] = true;
        }
    }
    DegradedRender {
        rendering,
        oracle,
        true_error,
        error_valid,
    }
}

/// A rendering backend that serves degraded oracle renders.
#[derive(Debug, Clone)]
pub struct DegradedOracle {
    pub scene: AnalyticScene,
    pub spec: DegradationSpec,
}

impl DegradedOracle {
    pub fn new(scene: AnalyticScene, spec: DegradationSpec) -> Result<Self> {
        scene.validate()?;
        spec.validate()?;
        Ok(Self { scene, spec })
    }

    pub fn render_with_error(&self, view: &View) -> DegradedRender {
        degraded_render(&self.scene, &self.spec, view)
    }
}

impl RenderingBackend for DegradedOracle {
    fn render(&self, view: &View) -> Rendering {
        degraded_render(&self.scene, &self.spec, view).rendering
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::scene::presets;
    use crate::geometry::{Intrinsics, Pose};

    fn cam() -> View {
        let k = Intrinsics::centered(40.0, 40, 40).unwrap();
        View::new("v0", k, Pose::identity()).unwrap()
    }

    #[test]
    fn zero_spec_matches_oracle() {
        let scene = presets::textured_plane(2.0, 5.0, 0.2);
        let r = degraded_render(&scene, &DegradationSpec::none(), &cam());
        assert_eq!(r.rendering.depth, r.oracle.depth);
        assert_eq!(r.rendering.image, r.oracle.image);
        assert!(r.true_error.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn left_half_bias() {
        let scene = presets::textured_plane(2.0, 5.0, 0.2);
        let spec = DegradationSpec {
            region: Region::ImageRect {
                x0: 0.0,
                y0: 0.0,
                x1: 0.5,
                y1: 1.0,
            },
            depth_bias: 0.1,
            ..DegradationSpec::none()
        };
        let r = degraded_render(&scene, &spec, &cam());
        for i in 0..r.true_error.len() {
            let expect = if i % 40 < 20 { 0.1 } else { 0.0 };
            assert!((r.true_error[i] - expect).abs() < 1e-12, "pixel {i}");
            // error map is exactly |degraded - oracle|
            let recomputed = (r.rendering.depth.values[i] - r.oracle.depth.values[i]).abs();
            assert_eq!(r.true_error[i], recomputed);
        }
    }

    #[test]
    fn gaussian_noise_mean_abs_error() {
        let scene = presets::textured_plane(2.0, 50.0, 0.2);
        let k = Intrinsics::centered(100.0, 100, 100).unwrap();
        let view = View::new("v", k, Pose::identity()).unwrap();
        let spec = DegradationSpec {
            depth_noise_sigma: 0.05,
            seed: 9,
            ..DegradationSpec::none()
        };
        let r = degraded_render(&scene, &spec, &view);
        let mean = r.true_error.iter().sum::<f64>() / r.true_error.len() as f64;
        // E|N(0, s^2)| = s * sqrt(2 / pi)
        let expect = 0.05 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - expect).abs() < 0.2 * expect, "{mean} vs {expect}");
    }

    #[test]
    fn renders_are_repeatable_and_view_keyed() {
        let scene = presets::textured_plane(2.0, 5.0, 0.2);
        let spec = DegradationSpec {
            depth_noise_sigma: 0.05,
            seed: 1,
            ..DegradationSpec::none()
        };
        let a = degraded_render(&scene, &spec, &cam());
        let b = degraded_render(&scene, &spec, &cam());
        assert_eq!(a.rendering.depth, b.rendering.depth);
        let mut other = cam();
        other.id = "v1".into();
        let c = degraded_render(&scene, &spec, &other);
        assert_ne!(a.rendering.depth, c.rendering.depth);
    }

    #[test]
    fn view_filter_and_removal() {
        let scene = presets::two_primitives();
        let eye = nalgebra::Vector3::new(0.0, -3.0, 0.0);
        let pose = Pose::look_at(eye, nalgebra::Vector3::zeros(), nalgebra::Vector3::z()).unwrap();
        let view = View::new("a", Intrinsics::centered(40.0, 40, 40).unwrap(), pose).unwrap();
        let spec = DegradationSpec {
            depth_bias: 0.3,
            views: Some(vec!["b".into()]),
            ..DegradationSpec::none()
        };
        let r = degraded_render(&scene, &spec, &view);
        assert!(r.true_error.iter().all(|&e| e == 0.0));

        let removal = DegradationSpec {
            removed_primitives: vec![1],
            ..DegradationSpec::none()
        };
        let r = degraded_render(&scene, &removal, &view);
        assert!(r.rendering.depth.valid_count() < r.oracle.depth.valid_count());
    }

    #[test]
    fn sector_wraps_through_pi() {
        let r = Region::WorldSector {
            center: [0.0; 3],
            start: 3.0,
            end: -3.0,
        };
        assert!(r.contains_point(&Vector3::new(-1.0, 0.0, 0.0)));
        assert!(!r.contains_point(&Vector3::new(1.0, 0.0, 0.0)));
    }

    #[test]
    fn negative_sigma_rejected() {
        let spec = DegradationSpec {
            depth_noise_sigma: -1.0,
            ..DegradationSpec::none()
        };
        assert!(spec.validate().is_err());
    }
}
