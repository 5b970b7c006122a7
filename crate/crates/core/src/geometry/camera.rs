use nalgebra::{Matrix3, Rotation3, Unit, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Pinhole intrinsics. Pixel centers sit at integer coordinates, so pixel
/// `(0, 0)` covers the continuous point `(0.0, 0.0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square pixels with the principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fx > 0.0) {
            return Err(invalid("fx", format!("must be positive, got {}", self.fx)));
        }
        if !(self.fy.is_finite() && self.fy > 0.0) {
            return Err(invalid("fy", format!("must be positive, got {}", self.fy)));
        }
        if self.width == 0 {
            return Err(invalid("width", "must be at least 1"));
        }
        if self.height == 0 {
            return Err(invalid("height", "must be at least 1"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(invalid("cx", format!("{} outside [0, {})", self.cx, self.width)));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(invalid("cy", format!("{} outside [0, {})", self.cy, self.height)));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Camera-frame ray direction through `pixel`, scaled so its z component is 1.
    pub fn ray_direction(&self, pixel: Vector2<f64>) -> Vector3<f64> {
        Vector3::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy, 1.0)
    }

    /// Whether `pixel` lies in `[0, W-1] x [0, H-1]`, allowing
    /// [`EDGE_SNAP`] of round-off past the border.
    pub fn in_bounds(&self, pixel: Vector2<f64>) -> bool {
        pixel.x >= -EDGE_SNAP
            && pixel.y >= -EDGE_SNAP
            && pixel.x <= (self.width - 1) as f64 + EDGE_SNAP
            && pixel.y <= (self.height - 1) as f64 + EDGE_SNAP
    }
}

/// Pixel positions this close outside the image border count as on it, so
/// a point projected back onto an edge pixel is not lost to round-off.
pub const EDGE_SNAP: f64 = 1e-9;

/// Rigid camera-to-world transform: `X_world = R * X_cam + t`.
///
/// Camera axes follow the usual vision convention: +x right, +y down, +z
/// along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

const ORTHO_TOL: f64 = 1e-9;

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = Self { rotation, translation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let max_dev = gram.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !(max_dev < ORTHO_TOL) {
            return Err(invalid(
                "rotation",
                format!("not orthonormal (max |R^T R - I| = {max_dev:e})"),
            ));
        }
        let det = self.rotation.determinant();
        if !((det - 1.0).abs() < ORTHO_TOL) {
            return Err(invalid("rotation", format!("determinant {det} != 1")));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(invalid("translation", "must be finite"));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`. `up` is a world-space hint; the
    /// camera's -y axis is aligned with it as closely as possible.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        let norm = forward.norm();
        if !(norm > 1e-12) {
            return Err(Error::Precondition("look_at: eye coincides with target".into()));
        }
        let z = forward / norm;
        let mut x = z.cross(&up);
        if x.norm() < 1e-9 {
            // Looking along the up hint; any perpendicular axis will do.
            let alt = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            x = z.cross(&alt);
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Ok(Self {
            rotation,
            translation: eye,
        })
    }

    pub fn center(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Transform taking points in `self`'s camera frame to `target`'s frame.
    pub fn relative_to(&self, target: &Pose) -> Pose {
        target.inverse().compose(self)
    }

    /// Rotate the camera about one of its own axes, keeping the center fixed.
    pub fn rotated_local(&self, axis: Vector3<f64>, angle: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let mut rotation = self.rotation * rot.matrix();
        reorthonormalize(&mut rotation);
        Self {
            rotation,
            translation: self.translation,
        }
    }

    pub fn translated_local(&self, delta_cam: Vector3<f64>) -> Self {
        Self {
            rotation: self.rotation,
            translation: self.translation + self.rotation * delta_cam,
        }
    }
}

fn reorthonormalize(r: &mut Matrix3<f64>) {
    let x = r.column(0).normalize();
    let y = (r.column(1) - x * x.dot(&r.column(1))).normalize();
    let z = x.cross(&y);
    *r = Matrix3::from_columns(&[x, y, z]);
}

/// A posed camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub id: String,
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

impl View {
    pub fn new(id: impl Into<String>, intrinsics: Intrinsics, pose: Pose) -> Result<Self> {
        intrinsics.validate()?;
        pose.validate()?;
        Ok(Self {
            id: id.into(),
            intrinsics,
            pose,
        })
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn center(&self) -> Vector3<f64> {
        self.pose.center()
    }

    pub fn with_pose(&self, pose: Pose) -> Self {
        Self {
            id: self.id.clone(),
            intrinsics: self.intrinsics,
            pose,
        }
    }
}

/// Project a world point. Returns the pixel and the camera-frame depth `z`;
/// `z <= 0` means the point is behind the camera and the pixel is meaningless.
pub fn project(point_world: &Vector3<f64>, view: &View) -> (Vector2<f64>, f64) {
    let pc = view.pose.world_to_camera(point_world);
    let k = &view.intrinsics;
    let pixel = Vector2::new(k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy);
    (pixel, pc.z)
}

/// Lift a pixel at planar depth `depth` to world space.
pub fn unproject(pixel: Vector2<f64>, depth: f64, view: &View) -> Result<Vector3<f64>> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(Error::Precondition(format!(
            "unproject requires a positive finite depth, got {depth}"
        )));
    }
    let pc = view.intrinsics.ray_direction(pixel) * depth;
    Ok(view.pose.transform_point(&pc))
}
