//! Small oracle checks runnable from the command line.

use nalgebra::Vector3;

use crate::active::{fibonacci_sphere, select_next};
use crate::backends::{composite, presets, RaySample};
use crate::geometry::{warp_depth, warp_image, Intrinsics, Pose, View};
use crate::metrics::{ause, cloud_metrics, cloud_metrics_brute_force, PointCloud};
use crate::rng::{streams, CounterRng};
use crate::uncertainty::ViewScore;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        passed,
        detail: detail.into(),
    }
}

fn warp_identity() -> Check {
    let scene = presets::two_primitives();
    let k = Intrinsics::centered(24.0, 32, 32).expect("valid");
    let views = fibonacci_sphere(4, 3.0, Vector3::zeros(), k, "v", 0.0).expect("views");
    let mut worst: f64 = 0.0;
    for v in &views {
        let r = scene.render(v);
        let d = warp_depth((v, &r.depth), (v, &r.depth)).expect("sizes");
        let i = warp_image((v, &r.image), (v, &r.depth)).expect("sizes");
        for p in 0..r.depth.len() {
            if r.depth.valid[p] {
                worst = worst.max((d.values[p] - r.depth.values[p]).abs());
                for c in 0..3 {
                    worst = worst.max((i.values[p][c] - r.image.values[p][c]).abs());
                }
            }
        }
    }
    check("warp identity", worst < 1e-6, format!("max abs error {worst:.3e}"))
}

fn plane_shift() -> Check {
    // Fronto-parallel plane at z = 2, source shifted 0.2 m along +x: a
    // target pixel x maps to source pixel x - f*0.2/2 = x - 2 at f = 20.
    let k = Intrinsics::new(20.0, 20.0, 10.0, 10.0, 21, 21).expect("valid");
    let target = View::new("t", k, Pose::identity()).expect("view");
    let source = target.with_pose(Pose::identity().translated_local(Vector3::new(0.2, 0.0, 0.0)));
    let plane = crate::geometry::DepthMap::constant(21, 21, 2.0);
    let w = warp_depth((&source, &plane), (&target, &plane)).expect("sizes");
    let ok = (0..21 * 21).all(|p| {
        let x = p % 21;
        w.valid[p] == (x >= 2) && (!w.valid[p] || (w.values[p] - 2.0).abs() < 1e-12)
    });
    check("plane shift", ok, "valid iff source pixel in bounds, depth 2.0")
}

fn ause_hand() -> Check {
    let e = [1.0, 2.0, 3.0, 4.0];
    let u = [4.0, 3.0, 2.0, 1.0];
    let a = ause(&u, &e, &[true; 4], 4).unwrap_or(f64::NAN);
    // Uncertainty removes the smallest errors first: curve [2.5,3,3.5,4],
    // oracle [2.5,2,1.5,1]; normalized gap mean = (0+0.4+0.8+1.2)/4.
    check("ause enumeration", (a - 0.6).abs() < 1e-12, format!("ause {a}"))
}

fn composite_half() -> Check {
    let t = std::f64::consts::LN_2;
    let s = [
        RaySample {
            t: 1.0,
            delta: 1.0,
            sigma: t,
            color: [1.0, 0.0, 0.0],
        },
        RaySample {
            t: 2.0,
            delta: 1.0,
            sigma: t,
            color: [0.0, 1.0, 0.0],
        },
    ];
    let c = composite(&s, [0.0, 0.0, 1.0]);
    let ok = (c.weights[0] - 0.5).abs() < 1e-12
        && (c.weights[1] - 0.25).abs() < 1e-12
        && (c.color[2] - 0.25).abs() < 1e-12
        && (c.depth - 1.0).abs() < 1e-12;
    check("alpha compositing", ok, format!("weights {:?}", c.weights))
}

fn cloud_grid() -> Check {
    let rng = CounterRng::new(11);
    let pts = |off: u64, n: u64| {
        PointCloud::new(
            (0..n)
                .map(|i| {
                    let b = off + 3 * i;
                    Vector3::new(
                        rng.uniform(streams::TEST_DATA, b),
                        rng.uniform(streams::TEST_DATA, b + 1),
                        rng.uniform(streams::TEST_DATA, b + 2),
                    )
                })
                .collect(),
        )
        .expect("finite")
    };
    let a = pts(0, 300);
    let b = pts(10_000, 250);
    let ok = cloud_metrics(&a, &b, 0.05).ok() == cloud_metrics_brute_force(&a, &b, 0.05).ok();
    check("cloud grid vs brute force", ok, "300 vs 250 uniform points")
}

fn tie_break() -> Check {
    let s: Vec<ViewScore> = [("a", 0.2), ("b", 0.9), ("c", 0.9)]
        .iter()
        .map(|(id, v)| ViewScore {
            view_id: id.to_string(),
            score: *v,
            covered_fraction: 1.0,
        })
        .collect();
    let got = select_next(&s).unwrap_or_default();
    check("argmax tie-break", got == "b", format!("selected {got}"))
}

fn pfm_round_trip() -> Check {
    let mut m = crate::geometry::DepthMap::from_values(2, 2, vec![1.5, 0.25, 3.0, 7.0]).expect("valid");
    m.valid[2] = false;
    m.values[2] = 0.0;
    let back = crate::io::decode_scalar_pfm(&crate::io::encode_scalar_pfm(&m));
    check(
        "pfm round trip",
        back.as_ref().ok() == Some(&m),
        "2x2 with one invalid pixel",
    )
}

pub fn run_all() -> Vec<Check> {
    vec![
        warp_identity(),
        plane_shift(),
        ause_hand(),
        composite_half(),
        cloud_grid(),
        tie_break(),
        pfm_round_trip(),
    ]
}
