//! Multi-view consistency uncertainty.
//!
//! Two estimators share one idea: render the target view, backward-warp
//! renders of the training (source) views into it through the target depth,
//! and measure disagreement.
//!
//! * [`depth_consistency`]: per pixel, the mean absolute difference between
//!   the target depth and every valid warped source depth.
//! * [`color_min_score`]: per pixel, the minimum over sources of the
//!   channel-averaged absolute color difference, summed over the image.
//!   Pixels no source reaches are charged a fixed penalty.

use serde::{Deserialize, Serialize};

use crate::backends::{Rendering, RenderingBackend};
use crate::error::{Error, Result};
use crate::geometry::{check_same_size, warp_depth, warp_image, DepthMap, ImageBuffer, View};

/// Per-pixel uncertainty for one target view.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    /// Number of sources averaged at each pixel.
    pub contributing_count: Vec<u32>,
}

impl UncertaintyMap {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Compensated sum over valid pixels.
    pub fn sum_valid(&self) -> f64 {
        neumaier_sum(self.values.iter().zip(&self.valid).filter(|(_, &v)| v).map(|(&x, _)| x))
    }

    pub fn mean_valid(&self) -> Option<f64> {
        let n = self.valid_count();
        (n > 0).then(|| self.sum_valid() / n as f64)
    }

    pub fn as_depth_like(&self) -> DepthMap {
        DepthMap {
            width: self.width,
            height: self.height,
            values: self.values.clone(),
            valid: self.valid.clone(),
        }
    }
}

/// Image-level uncertainty of one candidate view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewScore {
    pub view_id: String,
    pub score: f64,
    /// Fraction of target pixels reached by at least one source.
    pub covered_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreOptions {
    /// Charge per uncovered pixel in the color score.
    pub uncovered_penalty: f64,
    /// Also charge pixels whose own target depth is invalid. Off by default:
    /// such pixels cannot be warped to at all.
    pub penalize_invalid_target: bool,
    /// Use only the k sources closest (camera center distance) to the target.
    pub nearest_k: Option<usize>,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            uncovered_penalty: 1.0,
            penalize_invalid_target: false,
            nearest_k: None,
        }
    }
}

/// Neumaier-compensated summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean absolute depth disagreement per pixel. A source contributes at a
/// pixel only where its warp is valid (in bounds, source depth present, and
/// positive target-frame depth). Pixels with no contributor are invalid.
pub fn depth_consistency(target_depth: &DepthMap, warped: &[DepthMap]) -> Result<UncertaintyMap> {
    let (w, h) = (target_depth.width, target_depth.height);
    for wd in warped {
        check_same_size((w, h), (wd.width, wd.height))?;
    }
    let n = w * h;
    let mut map = UncertaintyMap {
        width: w,
        height: h,
        values: vec![0.0; n],
        valid: vec![false; n],
        contributing_count: vec![0; n],
    };
    let mut diffs = Vec::with_capacity(warped.len());
    for i in 0..n {
        if !target_depth.valid[i] {
            continue;
        }
        diffs.clear();
        diffs.extend(
            warped
                .iter()
                .filter(|wd| wd.valid[i])
                .map(|wd| (target_depth.values[i] - wd.values[i]).abs()),
        );
        if diffs.is_empty() {
            continue;
        }
        // sorted accumulation makes the mean independent of source order
        diffs.sort_by(f64::total_cmp);
        map.values[i] = diffs.iter().sum::<f64>() / diffs.len() as f64;
        map.valid[i] = true;
        map.contributing_count[i] = diffs.len() as u32;
    }
    Ok(map)
}

/// Per-pixel result of the color score.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorScore {
    pub score: f64,
    pub covered_fraction: f64,
    /// Minimum difference at covered pixels.
    pub per_pixel: Vec<Option<f64>>,
    pub uncovered_charged: usize,
}

fn color_diff(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0
}

/// Sum over pixels of the minimum reprojection color difference.
pub fn color_min_score(
    target_image: &ImageBuffer,
    target_depth: &DepthMap,
    warped: &[ImageBuffer],
    options: &ScoreOptions,
) -> Result<ColorScore> {
    let (w, h) = (target_image.width, target_image.height);
    check_same_size((w, h), (target_depth.width, target_depth.height))?;
    for wi in warped {
        check_same_size((w, h), (wi.width, wi.height))?;
    }
    let n = w * h;
    let mut per_pixel = vec![None; n];
    let mut uncovered = 0usize;
    for (i, slot) in per_pixel.iter_mut().enumerate() {
        let best = if target_image.valid[i] {
            warped
                .iter()
                .filter(|wi| wi.valid[i])
                .map(|wi| color_diff(&target_image.values[i], &wi.values[i]))
                .min_by(f64::total_cmp)
        } else {
            None
        };
        match best {
            Some(d) => *slot = Some(d),
            None if target_depth.valid[i] || options.penalize_invalid_target => uncovered += 1,
            None => {}
        }
    }
    let covered = per_pixel.iter().filter(|p| p.is_some()).count();
    let score = neumaier_sum(per_pixel.iter().flatten().copied()) + options.uncovered_penalty * uncovered as f64;
    Ok(ColorScore {
        score,
        covered_fraction: if n == 0 { 0.0 } else { covered as f64 / n as f64 },
        per_pixel,
        uncovered_charged: uncovered,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    DepthAvg,
    ColorMin,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintyOutput {
    Map(UncertaintyMap),
    Score(ColorScore),
}

/// Rendering-free core shared by [`pixel_uncertainty`] and [`image_uncertainty`].
pub fn uncertainty_from_renders(
    target_depth: &DepthMap,
    target_image: &ImageBuffer,
    warped_depths: &[DepthMap],
    warped_images: &[ImageBuffer],
    mode: Mode,
    options: &ScoreOptions,
) -> Result<UncertaintyOutput> {
    match mode {
        Mode::DepthAvg => depth_consistency(target_depth, warped_depths).map(UncertaintyOutput::Map),
        Mode::ColorMin => {
            color_min_score(target_image, target_depth, warped_images, options).map(UncertaintyOutput::Score)
        }
    }
}

/// Renders of the source views, computed once and reused across targets.
#[derive(Debug, Clone)]
pub struct SourceRenders {
    pub views: Vec<View>,
    pub renders: Vec<Rendering>,
}

impl SourceRenders {
    pub fn render(backend: &dyn RenderingBackend, views: &[View]) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Empty("source views"));
        }
        Ok(Self {
            views: views.to_vec(),
            renders: views.iter().map(|v| backend.render(v)).collect(),
        })
    }

    fn selected(&self, target: &View, nearest_k: Option<usize>) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.views.len()).collect();
        if let Some(k) = nearest_k {
            let c = target.center();
            idx.sort_by(|&a, &b| {
                let da = (self.views[a].center() - c).norm();
                let db = (self.views[b].center() - c).norm();
                da.total_cmp(&db).then(a.cmp(&b))
            });
            idx.truncate(k.max(1));
            idx.sort_unstable();
        }
        idx
    }

    pub fn warped_depths(
        &self,
        target: &View,
        target_render: &Rendering,
        nearest_k: Option<usize>,
    ) -> Result<Vec<DepthMap>> {
        self.selected(target, nearest_k)
            .into_iter()
            .map(|s| warp_depth((&self.views[s], &self.renders[s].depth), (target, &target_render.depth)))
            .collect()
    }

    pub fn warped_images(
        &self,
        target: &View,
        target_render: &Rendering,
        nearest_k: Option<usize>,
    ) -> Result<Vec<ImageBuffer>> {
        self.selected(target, nearest_k)
            .into_iter()
            .map(|s| warp_image((&self.views[s], &self.renders[s].image), (target, &target_render.depth)))
            .collect()
    }

    pub fn pixel_uncertainty(
        &self,
        target: &View,
        target_render: &Rendering,
        options: &ScoreOptions,
    ) -> Result<UncertaintyMap> {
        let warped = self.warped_depths(target, target_render, options.nearest_k)?;
        depth_consistency(&target_render.depth, &warped)
    }

    pub fn image_uncertainty(
        &self,
        target: &View,
        target_render: &Rendering,
        options: &ScoreOptions,
    ) -> Result<ViewScore> {
        let warped = self.warped_images(target, target_render, options.nearest_k)?;
        let s = color_min_score(&target_render.image, &target_render.depth, &warped, options)?;
        Ok(ViewScore {
            view_id: target.id.clone(),
            score: s.score,
            covered_fraction: s.covered_fraction,
        })
    }
}

/// Per-pixel depth-consistency uncertainty of `target` against `sources`.
pub fn pixel_uncertainty(
    backend: &dyn RenderingBackend,
    sources: &[View],
    target: &View,
    options: &ScoreOptions,
) -> Result<UncertaintyMap> {
    if !backend.can_render_depth() {
        return Err(Error::Precondition("backend cannot render depth".into()));
    }
    let prepared = SourceRenders::render(backend, sources)?;
    prepared.pixel_uncertainty(target, &backend.render(target), options)
}

/// Image-level min-reprojection color uncertainty of `target`.
pub fn image_uncertainty(
    backend: &dyn RenderingBackend,
    sources: &[View],
    target: &View,
    options: &ScoreOptions,
) -> Result<ViewScore> {
    if !(backend.can_render_depth() && backend.can_render_image()) {
        return Err(Error::Precondition("backend must render image and depth".into()));
    }
    let prepared = SourceRenders::render(backend, sources)?;
    prepared.image_uncertainty(target, &backend.render(target), options)
}
