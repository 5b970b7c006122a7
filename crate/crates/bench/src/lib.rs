//! Fixtures shared by the kernel benchmarks.

use nalgebra::Vector3;

use mvuq::backends::{presets, AnalyticScene, Rendering, VoxelField};
use mvuq::rng::{streams, CounterRng};
use mvuq::{Intrinsics, Pose, View};

/// A square view on a ring around the two-primitive scene.
pub fn orbit_view(id: &str, size: usize, azimuth: f64) -> View {
    let k = Intrinsics::centered(size as f64 * 0.9, size, size).expect("valid intrinsics");
    let eye = Vector3::new(2.6 * azimuth.cos(), 2.6 * azimuth.sin(), 0.8);
    View::new(
        id,
        k,
        Pose::look_at(eye, Vector3::zeros(), Vector3::z()).expect("valid pose"),
    )
    .expect("valid view")
}

pub fn scene() -> AnalyticScene {
    presets::two_primitives()
}

/// Target and source renders a small baseline apart.
pub fn warp_pair(size: usize) -> ((View, Rendering), (View, Rendering)) {
    let s = scene();
    let t = orbit_view("t", size, 0.3);
    let src = orbit_view("s", size, 0.42);
    let (rt, rs) = (s.render(&t), s.render(&src));
    ((t, rt), (src, rs))
}

/// A voxel field with pseudo-random parameters.
pub fn random_field(res: usize) -> VoxelField {
    let mut f = VoxelField::new([res; 3], [-1.0; 3], [1.0; 3], 0.02, 0.8, 4.5, 0.0).expect("valid field");
    let rng = CounterRng::new(5);
    for (i, v) in f.density.iter_mut().enumerate() {
        *v = rng.uniform(streams::TEST_DATA, i as u64) * 4.0 - 2.0;
    }
    for (i, v) in f.color.iter_mut().enumerate() {
        *v = rng.normal(streams::TEST_DATA, (1 << 32) + i as u64);
    }
    f
}

/// `n` uniform values from the test stream, offset by `salt`.
pub fn uniforms(n: usize, salt: u64) -> Vec<f64> {
    let rng = CounterRng::new(salt);
    (0..n).map(|i| rng.uniform(streams::TEST_DATA, i as u64)).collect()
}

pub fn points(n: usize, salt: u64) -> Vec<Vector3<f64>> {
    let u = uniforms(3 * n, salt);
    u.chunks(3).map(|c| Vector3::new(c[0], c[1], c[2] * 0.2)).collect()
}
