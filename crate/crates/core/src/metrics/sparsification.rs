//! Sparsification curves and AUSE.
//!
//! Pixels are removed in order of decreasing uncertainty; after removing
//! the top `k / num_bins` share, the mean absolute error of what remains is
//! recorded. The oracle curve removes pixels by decreasing true error.
//! AUSE is the mean gap between the two curves once each is normalized by
//! its value at fraction 0 (the full-set MAE, identical for both).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsificationCurve {
    pub fractions: Vec<f64>,
    /// Remaining-pixel MAE at each fraction.
    pub mae: Vec<f64>,
    /// MAE at fraction 0.
    pub normalization: f64,
}

impl SparsificationCurve {
    /// MAE divided by the full-set MAE (all zeros when that MAE is 0).
    pub fn normalized(&self) -> Vec<f64> {
        if self.normalization > 0.0 {
            self.mae.iter().map(|m| m / self.normalization).collect()
        } else {
            vec![0.0; self.mae.len()]
        }
    }
}

fn masked_indices(uncertainty: &[f64], error: &[f64], mask: &[bool], num_bins: usize) -> Result<Vec<usize>> {
    if uncertainty.len() != error.len() || error.len() != mask.len() {
        return Err(Error::Precondition(format!(
            "uncertainty/error/mask lengths differ ({}, {}, {})",
            uncertainty.len(),
            error.len(),
            mask.len()
        )));
    }
    if num_bins < 2 {
        return Err(invalid("num_bins", "need at least 2 bins"));
    }
    let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if idx.is_empty() {
        return Err(Error::Empty("sparsification mask"));
    }
    if idx.len() < num_bins {
        return Err(Error::Precondition(format!(
            "{} masked pixels is fewer than {num_bins} bins",
            idx.len()
        )));
    }
    if let Some(&i) = idx
        .iter()
        .find(|&&i| !uncertainty[i].is_finite() || !error[i].is_finite())
    {
        return Err(Error::Precondition(format!("non-finite value at pixel {i}")));
    }
    Ok(idx)
}

/// Descending by `key`, ties by ascending pixel index.
fn removal_order(mut idx: Vec<usize>, key: &[f64]) -> Vec<usize> {
    idx.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    idx
}

fn curve_for_order(order: &[usize], error: &[f64], num_bins: usize) -> SparsificationCurve {
    let n = order.len();
    // suffix[j] = sum of errors of order[j..]
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + error[order[j]];
    }
    let mut fractions = Vec::with_capacity(num_bins);
    let mut mae = Vec::with_capacity(num_bins);
    for k in 0..num_bins {
        let removed = k * n / num_bins;
        fractions.push(k as f64 / num_bins as f64);
        mae.push(suffix[removed] / (n - removed) as f64);
    }
    SparsificationCurve {
        fractions,
        normalization: mae[0],
        mae,
    }
}

pub fn sparsification(
    uncertainty: &[f64],
    error: &[f64],
    mask: &[bool],
    num_bins: usize,
) -> Result<SparsificationCurve> {
    let idx = masked_indices(uncertainty, error, mask, num_bins)?;
    Ok(curve_for_order(&removal_order(idx, uncertainty), error, num_bins))
}

/// The best achievable curve: removal by true error.
pub fn oracle_sparsification(error: &[f64], mask: &[bool], num_bins: usize) -> Result<SparsificationCurve> {
    sparsification(error, error, mask, num_bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuseReport {
    pub ause: f64,
    pub curve: SparsificationCurve,
    pub oracle: SparsificationCurve,
}

pub fn ause_report(uncertainty: &[f64], error: &[f64], mask: &[bool], num_bins: usize) -> Result<AuseReport> {
    let curve = sparsification(uncertainty, error, mask, num_bins)?;
    let oracle = oracle_sparsification(error, mask, num_bins)?;
    let (u, o) = (curve.normalized(), oracle.normalized());
    let ause = u.iter().zip(&o).map(|(a, b)| a - b).sum::<f64>() / num_bins as f64;
    Ok(AuseReport { ause, curve, oracle })
}

/// Area between the uncertainty-ordered and error-ordered sparsification
/// curves (signed per-bin gaps, averaged).
pub fn ause(uncertainty: &[f64], error: &[f64], mask: &[bool], num_bins: usize) -> Result<f64> {
    ause_report(uncertainty, error, mask, num_bins).map(|r| r.ause)
}
