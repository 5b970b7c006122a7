//! Image and depth quality metrics.

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_same_size, DepthMap, ImageBuffer};
use crate::uncertainty::neumaier_sum;

/// Reported in place of +inf for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio in dB (peak 1.0) over jointly valid pixels.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_size((a.width, a.height), (b.width, b.height))?;
    let mut count = 0usize;
    let sq = (0..a.len())
        .filter(|&i| a.valid[i] && b.valid[i])
        .flat_map(|i| {
            count += 1;
            (0..3).map(move |c| (a.values[i][c] - b.values[i][c]).powi(2))
        })
        .collect::<Vec<f64>>();
    if count == 0 {
        return Err(Error::Empty("jointly valid pixels"));
    }
    let mse = neumaier_sum(sq) / (3 * count) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering: output is `(w - k + 1) x (h - k + 1)`.
fn filter_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|j| kernel[j] * src[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|j| kernel[j] * rows[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity with a Gaussian window, computed per channel
/// and averaged. Pixel validity is ignored; values are used as stored.
pub fn ssim_with(a: &ImageBuffer, b: &ImageBuffer, p: &SsimParams) -> Result<f64> {
    check_same_size((a.width, a.height), (b.width, b.height))?;
    let (w, h) = (a.width, a.height);
    if w < p.window || h < p.window {
        return Err(invalid(
            "window",
            format!("image {w}x{h} smaller than the {} px SSIM window", p.window),
        ));
    }
    let kernel = gaussian_kernel(p.window, p.sigma);
    let c1 = (p.k1 * 1.0).powi(2);
    let c2 = (p.k2 * 1.0).powi(2);
    let mut total = 0.0;
    for ch in 0..3 {
        let xa: Vec<f64> = a.values.iter().map(|v| v[ch]).collect();
        let xb: Vec<f64> = b.values.iter().map(|v| v[ch]).collect();
        let aa: Vec<f64> = xa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = xb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = xa.iter().zip(&xb).map(|(x, y)| x * y).collect();
        let mu_a = filter_valid(&xa, w, h, &kernel);
        let mu_b = filter_valid(&xb, w, h, &kernel);
        let e_aa = filter_valid(&aa, w, h, &kernel);
        let e_bb = filter_valid(&bb, w, h, &kernel);
        let e_ab = filter_valid(&ab, w, h, &kernel);
        let vals = (0..mu_a.len()).map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        });
        total += neumaier_sum(vals) / mu_a.len() as f64;
    }
    Ok(total / 3.0)
}

pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    ssim_with(a, b, &SsimParams::default())
}

/// Mean absolute depth difference over jointly valid pixels.
pub fn depth_mae(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    check_same_size((gt.width, gt.height), (pred.width, pred.height))?;
    let diffs: Vec<f64> = (0..gt.len())
        .filter(|&i| pred.valid[i] && gt.valid[i])
        .map(|i| (pred.values[i] - gt.values[i]).abs())
        .collect();
    if diffs.is_empty() {
        return Err(Error::Empty("jointly valid depth pixels"));
    }
    let n = diffs.len();
    Ok(neumaier_sum(diffs) / n as f64)
}
