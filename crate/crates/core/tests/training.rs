use nalgebra::Vector3;

use mvuq::backends::{presets, train, TrainConfig, TrainingImage, VoxelField};
use mvuq::{Intrinsics, Pose, View};

fn plane_views() -> Vec<TrainingImage> {
    let scene = presets::textured_plane(3.0, 1.0, 0.5);
    let k = Intrinsics::centered(16.0, 16, 16).unwrap();
    (0..8)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 8.0;
            let eye = Vector3::new(0.4 * a.cos(), 0.4 * a.sin(), 0.0);
            let view = View::new(
                format!("v{i}"),
                k,
                Pose::look_at(eye, Vector3::new(0.0, 0.0, 3.0), -Vector3::y()).unwrap(),
            )
            .unwrap();
            TrainingImage {
                image: scene.render(&view).image,
                view,
            }
        })
        .collect()
}

fn window_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn fitting_the_textured_plane_reduces_the_loss_tenfold() {
    let data = plane_views();
    let mut field = VoxelField::new([25, 25, 5], [-1.2, -1.2, 2.8], [1.2, 1.2, 3.2], 0.02, 0.5, 4.0, 0.0).unwrap();
    let config = TrainConfig {
        learning_rate: 50.0,
        ray_batch: 256,
        momentum: 0.9,
    };
    let trace = train(&mut field, &data, 2000, &config, 3).unwrap();
    let (start, end) = (window_mean(&trace[..20]), window_mean(&trace[trace.len() - 100..]));
    assert!(end < 0.1 * start, "loss {start} -> {end}");
}

#[test]
fn training_is_reproducible() {
    let data = plane_views();
    let fresh = || VoxelField::new([6, 6, 4], [-1.2, -1.2, 2.6], [1.2, 1.2, 3.4], 0.05, 0.5, 4.0, 0.0).unwrap();
    let config = TrainConfig::default();
    let (mut a, mut b) = (fresh(), fresh());
    let ta = train(&mut a, &data, 50, &config, 11).unwrap();
    let tb = train(&mut b, &data, 50, &config, 11).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(a, b);
    let mut c = fresh();
    train(&mut c, &data, 50, &config, 12).unwrap();
    assert_ne!(a, c);
}

#[test]
fn training_without_views_is_an_error() {
    let mut field = VoxelField::new([2, 2, 2], [0.0; 3], [1.0; 3], 0.1, 0.1, 2.0, 0.0).unwrap();
    assert!(train(&mut field, &[], 10, &TrainConfig::default(), 0).is_err());
}
