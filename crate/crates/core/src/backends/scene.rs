//! Analytic ray-traced scenes used as ground truth.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Rendering, RenderingBackend};
use crate::error::{invalid, Result};
use crate::geometry::{DepthMap, ImageBuffer, Rgb, View};

const HIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    /// The square `{x : n.x = offset}` clipped to `half_extent` along two
    /// tangent axes around the point `n * offset`.
    Plane {
        normal: [f64; 3],
        offset: f64,
        half_extent: f64,
    },
}

/// Two-color 3D checkerboard evaluated in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checker {
    pub color: Rgb,
    pub cell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Primitive {
    pub shape: Shape,
    pub albedo: Rgb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checker: Option<Checker>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Light {
    /// Direction the light travels.
    pub direction: [f64; 3],
    pub ambient: f64,
    pub diffuse: f64,
}

impl Default for Light {
    fn default() -> Self {
        Self {
            direction: [-0.3, 0.4, -1.0],
            ambient: 0.4,
            diffuse: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticScene {
    #[serde(default)]
    pub primitives: Vec<Primitive>,
    #[serde(default = "default_background")]
    pub background: Rgb,
    #[serde(default)]
    pub light: Light,
}

fn default_background() -> Rgb {
    [0.0, 0.0, 0.0]
}

impl Default for AnalyticScene {
    fn default() -> Self {
        Self {
            primitives: Vec::new(),
            background: default_background(),
            light: Light::default(),
        }
    }
}

/// Closest intersection along a ray.
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    /// Ray parameter; equals camera-frame depth for camera rays.
    pub t: f64,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub primitive: usize,
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

fn unit_color(c: &Rgb) -> bool {
    c.iter().all(|v| (0.0..=1.0).contains(v))
}

fn plane_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&a).normalize();
    let v = n.cross(&u);
    (u, v)
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Sphere { radius, center } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("radius", format!("must be positive, got {radius}")));
                }
                if !center.iter().all(|c| c.is_finite()) {
                    return Err(invalid("center", "must be finite"));
                }
            }
            Shape::Box { min, max } => {
                if !min.iter().zip(max).all(|(a, b)| a < b) {
                    return Err(invalid("min", "box min must be below max on every axis"));
                }
            }
            Shape::Plane {
                normal, half_extent, ..
            } => {
                if (v3(*normal).norm() - 1.0).abs() > 1e-9 {
                    return Err(invalid("normal", "plane normal must have unit length"));
                }
                if !(*half_extent > 0.0) {
                    return Err(invalid("half_extent", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Nearest hit with `t > HIT_EPS`; returns `(t, outward normal)`.
    fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        match self {
            Shape::Sphere { center, radius } => {
                let c = v3(*center);
                let oc = o - c;
                let a = d.norm_squared();
                let b = oc.dot(d);
                let cc = oc.norm_squared() - radius * radius;
                let disc = b * b - a * cc;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [(-b - sq) / a, (-b + sq) / a].into_iter().find(|&t| t > HIT_EPS)?;
                let p = o + d * t;
                Some((t, (p - c) / *radius))
            }
            Shape::Box { min, max } => {
                let (lo, hi) = (v3(*min), v3(*max));
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                let mut n0 = Vector3::zeros();
                let mut n1 = Vector3::zeros();
                for k in 0..3 {
                    if d[k].abs() < 1e-300 {
                        if o[k] < lo[k] || o[k] > hi[k] {
                            return None;
                        }
                        continue;
                    }
                    let inv = 1.0 / d[k];
                    let (mut ta, mut tb) = ((lo[k] - o[k]) * inv, (hi[k] - o[k]) * inv);
                    let mut na = Vector3::zeros();
                    na[k] = -1.0;
                    let mut nb = Vector3::zeros();
                    nb[k] = 1.0;
                    if ta > tb {
                        std::mem::swap(&mut ta, &mut tb);
                        std::mem::swap(&mut na, &mut nb);
                    }
                    if ta > t0 {
                        t0 = ta;
                        n0 = na;
                    }
                    if tb < t1 {
                        t1 = tb;
                        n1 = nb;
                    }
                }
                if t0 > t1 {
                    return None;
                }
                if t0 > HIT_EPS {
                    Some((t0, n0))
                } else if t1 > HIT_EPS {
                    Some((t1, n1))
                } else {
                    None
                }
            }
            Shape::Plane {
                normal,
                offset,
                half_extent,
            } => {
                let n = v3(*normal);
                let denom = n.dot(d);
                if denom.abs() < 1e-300 {
                    return None;
                }
                let t = (offset - n.dot(o)) / denom;
                if !(t > HIT_EPS) {
                    return None;
                }
                let p = o + d * t;
                let (u, v) = plane_basis(&n);
                let rel = p - n * *offset;
                if rel.dot(&u).abs() > *half_extent || rel.dot(&v).abs() > *half_extent {
                    return None;
                }
                Some((t, n))
            }
        }
    }
}

impl Primitive {
    pub fn solid(shape: Shape, albedo: Rgb) -> Self {
        Self {
            shape,
            albedo,
            checker: None,
        }
    }

    pub fn checkered(shape: Shape, albedo: Rgb, other: Rgb, cell: f64) -> Self {
        Self {
            shape,
            albedo,
            checker: Some(Checker { color: other, cell }),
        }
    }

    pub fn albedo_at(&self, p: &Vector3<f64>) -> Rgb {
        match &self.checker {
            Some(ch) => {
                let s: i64 = p.iter().map(|c| (c / ch.cell).floor() as i64).sum();
                if s.rem_euclid(2) == 0 {
                    self.albedo
                } else {
                    ch.color
                }
            }
            None => self.albedo,
        }
    }
}

impl AnalyticScene {
    pub fn new(primitives: Vec<Primitive>, background: Rgb) -> Result<Self> {
        let scene = Self {
            primitives,
            background,
            light: Light::default(),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.primitives {
            p.shape.validate()?;
            if !unit_color(&p.albedo) || !p.checker.iter().all(|c| unit_color(&c.color)) {
                return Err(invalid("albedo", "colors must lie in [0, 1]"));
            }
            if let Some(ch) = &p.checker {
                if !(ch.cell > 0.0) {
                    return Err(invalid("cell", "checker cell must be positive"));
                }
            }
        }
        if !unit_color(&self.background) {
            return Err(invalid("background", "colors must lie in [0, 1]"));
        }
        if v3(self.light.direction).norm() < 1e-12 {
            return Err(invalid("direction", "light direction must be non-zero"));
        }
        Ok(())
    }

    /// Closest hit, skipping primitives for which `skip` returns true.
    pub fn trace_filtered(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
        skip: impl Fn(usize) -> bool,
    ) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, prim) in self.primitives.iter().enumerate() {
            if skip(i) {
                continue;
            }
            if let Some((t, normal)) = prim.shape.intersect(origin, dir) {
                if best.as_ref().is_none_or(|b| t < b.t) {
                    best = Some(Hit {
                        t,
                        point: origin + dir * t,
                        normal,
                        primitive: i,
                    });
                }
            }
        }
        best
    }

    pub fn trace(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        self.trace_filtered(origin, dir, |_| false)
    }

    /// Lambertian shading with the normal flipped toward the viewer.
    pub fn shade(&self, hit: &Hit, dir: &Vector3<f64>) -> Rgb {
        let n = if hit.normal.dot(dir) > 0.0 {
            -hit.normal
        } else {
            hit.normal
        };
        let l = -v3(self.light.direction).normalize();
        let k = self.light.ambient + self.light.diffuse * n.dot(&l).max(0.0);
        self.primitives[hit.primitive]
            .albedo_at(&hit.point)
            .map(|a| (a * k).clamp(0.0, 1.0))
    }

    /// World-space ray through a pixel; the direction has camera-frame z = 1.
    pub fn camera_ray(view: &View, idx: usize) -> (Vector3<f64>, Vector3<f64>) {
        let w = view.width();
        let px = Vector2::new((idx % w) as f64, (idx / w) as f64);
        let d = view.pose.rotation * view.intrinsics.ray_direction(px);
        (view.pose.translation, d)
    }

    /// Per-pixel hits for a view (used by the degradation wrapper too).
    pub fn hits(&self, view: &View, skip: &(dyn Fn(usize) -> bool + Sync)) -> Vec<Option<(Hit, Rgb)>> {
        (0..view.intrinsics.pixel_count())
            .into_par_iter()
            .map(|i| {
                let (o, d) = Self::camera_ray(view, i);
                self.trace_filtered(&o, &d, skip).map(|h| (h, self.shade(&h, &d)))
            })
            .collect()
    }

    pub fn render(&self, view: &View) -> Rendering {
        rendering_from_hits(view, self.background, &self.hits(view, &|_| false))
    }
}

pub(crate) fn rendering_from_hits(view: &View, background: Rgb, hits: &[Option<(Hit, Rgb)>]) -> Rendering {
    let (w, h) = (view.width(), view.height());
    let mut image = ImageBuffer::filled(w, h, background);
    let mut depth = DepthMap::invalid(w, h);
    for (i, hit) in hits.iter().enumerate() {
        if let Some((hit, color)) = hit {
            image.set(i, *color);
            depth.set(i, hit.t);
        }
    }
    Rendering { image, depth }
}

impl RenderingBackend for AnalyticScene {
    fn render(&self, view: &View) -> Rendering {
        AnalyticScene::render(self, view)
    }
}

/// Small scenes shared by tests, the self-test, and benchmarks.
pub mod presets {
    use super::*;

    /// Checkered fronto-parallel plane `z = depth`, facing a camera at the origin.
    pub fn textured_plane(depth: f64, half_extent: f64, cell: f64) -> AnalyticScene {
        AnalyticScene::new(
            vec![Primitive::checkered(
                Shape::Plane {
                    normal: [0.0, 0.0, 1.0],
                    offset: depth,
                    half_extent,
                },
                [0.9, 0.8, 0.2],
                [0.1, 0.3, 0.8],
                cell,
            )],
            [0.0, 0.0, 0.0],
        )
        .expect("valid preset")
    }

    /// A checkered sphere resting beside a checkered box, centered at the origin.
    pub fn two_primitives() -> AnalyticScene {
        AnalyticScene::new(
            vec![
                Primitive::checkered(
                    Shape::Sphere {
                        center: [-0.35, 0.1, 0.0],
                        radius: 0.4,
                    },
                    [0.9, 0.3, 0.2],
                    [0.95, 0.9, 0.8],
                    0.2,
                ),
                Primitive::checkered(
                    Shape::Box {
                        min: [0.1, -0.45, -0.35],
                        max: [0.6, 0.15, 0.35],
                    },
                    [0.2, 0.5, 0.9],
                    [0.9, 0.9, 0.3],
                    0.25,
                ),
            ],
            [0.05, 0.05, 0.05],
        )
        .expect("valid preset")
    }

    /// Three-object desk scene: ground slab, sphere, and box.
    pub fn desk() -> AnalyticScene {
        AnalyticScene::new(
            vec![
                Primitive::checkered(
                    Shape::Box {
                        min: [-1.0, -1.0, -0.6],
                        max: [1.0, 1.0, -0.5],
                    },
                    [0.7, 0.7, 0.7],
                    [0.3, 0.3, 0.3],
                    0.25,
                ),
                Primitive::checkered(
                    Shape::Sphere {
                        center: [-0.3, 0.2, -0.1],
                        radius: 0.4,
                    },
                    [0.9, 0.2, 0.2],
                    [0.9, 0.9, 0.9],
                    0.15,
                ),
                Primitive::solid(
                    Shape::Box {
                        min: [0.2, -0.6, -0.5],
                        max: [0.7, -0.1, 0.2],
                    },
                    [0.2, 0.6, 0.3],
                ),
            ],
            [0.1, 0.1, 0.15],
        )
        .expect("valid preset")
    }
}
