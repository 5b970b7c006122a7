use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::refine::refine_prepared;
use super::select::{score_candidates, score_prepared, select_next, SelectionPolicy};
use crate::backends::{RenderingBackend, TrainableBackend, TrainingImage};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Pose, View};
use crate::metrics::{cloud_metrics, depth_mae, psnr, ssim, PointCloud};
use crate::rng::CounterRng;
use crate::uncertainty::{ScoreOptions, SourceRenders, ViewScore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefineMode {
    Off,
    /// Refine the `k` best-scoring candidates and keep the best result.
    TopK {
        k: usize,
        radius: f64,
        iterations: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub initial_views: Vec<View>,
    pub candidate_pool: Vec<View>,
    pub eval_views: Vec<View>,
    pub rounds: usize,
    pub fit_budget_per_round: usize,
    pub refine: RefineMode,
    pub seed: u64,
    /// Reset the backend before every fit instead of warm-starting.
    pub from_scratch: bool,
    pub score_options: ScoreOptions,
    /// Distance threshold for point-cloud precision and recall.
    pub cloud_threshold: f64,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_views.is_empty() {
            return Err(invalid("initial_views", "need at least one view"));
        }
        if self.rounds == 0 {
            return Err(invalid("rounds", "must be at least 1"));
        }
        if !(self.cloud_threshold.is_finite() && self.cloud_threshold > 0.0) {
            return Err(invalid("cloud_threshold", "must be positive"));
        }
        if let RefineMode::TopK { k, radius, .. } = self.refine {
            if k == 0 {
                return Err(invalid("refine.k", "must be at least 1"));
            }
            if !(radius.is_finite() && radius > 0.0) {
                return Err(invalid("refine.radius", "must be positive"));
            }
        }
        let mut ids: Vec<&str> = self
            .initial_views
            .iter()
            .chain(&self.candidate_pool)
            .map(|v| v.id.as_str())
            .collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid("candidate_pool", format!("duplicate view id `{}`", w[0])));
        }
        Ok(())
    }
}

/// One round of the loop, serialised as a line of the round log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub selected_view: String,
    /// Pose actually added to the training set (differs from the pool entry
    /// when refinement moved it).
    pub selected_pose: Pose,
    pub scores: Vec<ViewScore>,
    /// Held-out metrics of the model fitted at the start of this round.
    pub metrics_after_fit: BTreeMap<String, f64>,
    pub final_fit_loss: Option<f64>,
}

/// Loop failure after some rounds completed.
#[derive(Debug)]
pub struct LoopError {
    pub completed: Vec<RoundRecord>,
    pub error: Error,
}

impl std::fmt::Display for LoopError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "active loop stopped after {} round(s): {}",
            self.completed.len(),
            self.error
        )
    }
}

impl std::error::Error for LoopError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Held-out metrics of `model` against `reference` on `views`: mean PSNR,
/// SSIM and depth MAE over views, plus point-cloud metrics of the union of
/// back-projected depths.
pub fn evaluate_views(
    model: &dyn RenderingBackend,
    reference: &dyn RenderingBackend,
    views: &[View],
    cloud_threshold: f64,
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    if views.is_empty() {
        return Ok(out);
    }
    let mut psnrs = Vec::new();
    let mut ssims = Vec::new();
    let mut maes = Vec::new();
    let mut pred_cloud = PointCloud::default();
    let mut gt_cloud = PointCloud::default();
    for v in views {
        let pred = model.render(v);
        let gt = reference.render(v);
        psnrs.push(psnr(&pred.image, &gt.image)?);
        if v.width() >= 11 && v.height() >= 11 {
            ssims.push(ssim(&pred.image, &gt.image)?);
        }
        match depth_mae(&pred.depth, &gt.depth) {
            Ok(m) => maes.push(m),
            Err(Error::Empty(_)) => {}
            Err(e) => return Err(e),
        }
        pred_cloud.extend(PointCloud::from_depth(&pred.depth, v));
        gt_cloud.extend(PointCloud::from_depth(&gt.depth, v));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    out.insert("psnr".into(), mean(&psnrs));
    if !ssims.is_empty() {
        out.insert("ssim".into(), mean(&ssims));
    }
    if !maes.is_empty() {
        out.insert("depth_mae".into(), mean(&maes));
    }
    if !pred_cloud.points.is_empty() && !gt_cloud.points.is_empty() {
        let c = cloud_metrics(&pred_cloud, &gt_cloud, cloud_threshold)?;
        out.insert("accuracy".into(), c.accuracy);
        out.insert("completion".into(), c.completion);
        out.insert("completion_ratio".into(), c.completion_ratio);
        out.insert("precision".into(), c.precision);
        out.insert("recall".into(), c.recall);
        out.insert("f1".into(), c.f1);
    }
    Ok(out)
}

/// Iteratively fit `backend` on ground-truth renders, score the remaining
/// pool and add the selected view. Every round fits, evaluates, scores and
/// selects, in that order. Deterministic for a fixed config and policy.
pub fn run_active_loop(
    backend: &mut dyn TrainableBackend,
    ground_truth: &dyn RenderingBackend,
    config: &LoopConfig,
    policy: &SelectionPolicy,
) -> std::result::Result<Vec<RoundRecord>, LoopError> {
    let mut records = Vec::with_capacity(config.rounds);
    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => {
                    return Err(LoopError {
                        completed: records,
                        error,
                    })
                }
            }
        };
    }
    bail!(config.validate());
    let rng = CounterRng::new(config.seed);
    let mut training: Vec<TrainingImage> = config
        .initial_views
        .iter()
        .map(|v| TrainingImage {
            view: v.clone(),
            image: ground_truth.render(v).image,
        })
        .collect();
    let mut pool = config.candidate_pool.clone();

    for round in 1..=config.rounds {
        if config.from_scratch {
            backend.reset();
        }
        let fit_seed = rng.u64(crate::rng::streams::VIEW_SAMPLING, round as u64);
        let losses = bail!(backend.fit(&training, config.fit_budget_per_round, fit_seed));
        let metrics = bail!(evaluate_views(
            &*backend,
            ground_truth,
            &config.eval_views,
            config.cloud_threshold
        ));
        if pool.is_empty() {
            return Err(LoopError {
                error: Error::PoolExhausted {
                    completed: records.len(),
                    requested: config.rounds,
                },
                completed: records,
            });
        }
        let train_views: Vec<View> = training.iter().map(|t| t.view.clone()).collect();
        let round_policy = match policy {
            SelectionPolicy::Random { seed } => SelectionPolicy::Random {
                seed: CounterRng::new(*seed).u64(crate::rng::streams::RANDOM_POLICY, round as u64),
            },
            p => *p,
        };
        let (scores, chosen) = bail!(select_round(&*backend, &train_views, &pool, &round_policy, config));
        let pos = pool
            .iter()
            .position(|v| v.id == chosen.id)
            .expect("selected view comes from the pool");
        pool.remove(pos);
        training.push(TrainingImage {
            image: ground_truth.render(&chosen).image,
            view: chosen.clone(),
        });
        records.push(RoundRecord {
            round,
            selected_view: chosen.id.clone(),
            selected_pose: chosen.pose,
            scores,
            metrics_after_fit: metrics,
            final_fit_loss: losses.last().copied(),
        });
    }
    Ok(records)
}

fn select_round(
    backend: &dyn RenderingBackend,
    train_views: &[View],
    pool: &[View],
    policy: &SelectionPolicy,
    config: &LoopConfig,
) -> Result<(Vec<ViewScore>, View)> {
    let warp = matches!(policy, SelectionPolicy::WarprfImage | SelectionPolicy::WarprfDepth);
    let prepared = if warp || config.refine != RefineMode::Off {
        Some(SourceRenders::render(backend, train_views)?)
    } else {
        None
    };
    let scores = match (&prepared, warp) {
        (Some(p), true) => score_prepared(backend, p, pool, *policy, &config.score_options)?,
        _ => score_candidates(backend, train_views, pool, policy, &config.score_options)?,
    };
    let best = select_next(&scores)?;
    let find = |id: &str| {
        pool.iter()
            .find(|v| v.id == id)
            .cloned()
            .expect("scored view is in pool")
    };
    match (config.refine, prepared) {
        (RefineMode::TopK { k, radius, iterations }, Some(p)) => {
            let mut order: Vec<&ViewScore> = scores.iter().collect();
            order.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.view_id.cmp(&b.view_id)));
            let mut winner: Option<(View, f64)> = None;
            for s in order.into_iter().take(k) {
                let out = refine_prepared(
                    backend,
                    &p,
                    &find(&s.view_id),
                    radius,
                    iterations,
                    &config.score_options,
                )?;
                if winner.as_ref().is_none_or(|(_, ws)| out.score > *ws) {
                    winner = Some((out.view, out.score));
                }
            }
            Ok((scores, winner.expect("k >= 1").0))
        }
        _ => Ok((scores, find(&best))),
    }
}
