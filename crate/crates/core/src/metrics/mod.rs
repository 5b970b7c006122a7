//! Evaluation metrics.

mod cloud;
mod image;
mod sparsification;

pub use cloud::{cloud_metrics, cloud_metrics_brute_force, nearest_brute_force, CloudMetrics, HashGrid, PointCloud};
pub use image::{depth_mae, psnr, ssim, ssim_with, SsimParams, PSNR_CAP_DB};
pub use sparsification::{
    ause, ause_report, oracle_sparsification, sparsification, AuseReport, SparsificationCurve, DEFAULT_BINS,
};
