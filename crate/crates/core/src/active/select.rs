use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::RenderingBackend;
use crate::error::{Error, Result};
use crate::geometry::View;
use crate::rng::{label_hash, streams, CounterRng};
use crate::uncertainty::{ScoreOptions, SourceRenders, ViewScore};

/// How candidate views are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionPolicy {
    /// Image-level color reprojection score.
    WarprfImage,
    /// Sum of valid per-pixel depth-consistency uncertainty.
    WarprfDepth,
    Random {
        seed: u64,
    },
    /// Largest distance from the candidate's camera center to the nearest
    /// training camera center.
    Farthest,
}

impl SelectionPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionPolicy::WarprfImage => "warprf_image",
            SelectionPolicy::WarprfDepth => "warprf_depth",
            SelectionPolicy::Random { .. } => "random",
            SelectionPolicy::Farthest => "farthest",
        }
    }

    /// Parse a policy name; `random` takes its seed from `seed`.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        match name {
            "warprf_image" | "warprf-image" => Ok(Self::WarprfImage),
            "warprf_depth" | "warprf-depth" => Ok(Self::WarprfDepth),
            "random" => Ok(Self::Random { seed }),
            "farthest" => Ok(Self::Farthest),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected warprf_image, warprf_depth, random, farthest)"
            ))),
        }
    }
}

/// Score every candidate under `policy`.
pub fn score_candidates(
    backend: &dyn RenderingBackend,
    train_views: &[View],
    candidates: &[View],
    policy: &SelectionPolicy,
    options: &ScoreOptions,
) -> Result<Vec<ViewScore>> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    match policy {
        SelectionPolicy::Random { seed } => {
            let rng = CounterRng::new(*seed);
            Ok(candidates
                .iter()
                .map(|c| ViewScore {
                    view_id: c.id.clone(),
                    score: rng.uniform(streams::RANDOM_POLICY, label_hash(&c.id)),
                    covered_fraction: 0.0,
                })
                .collect())
        }
        SelectionPolicy::Farthest => {
            if train_views.is_empty() {
                return Err(Error::Empty("training views"));
            }
            Ok(candidates
                .iter()
                .map(|c| ViewScore {
                    view_id: c.id.clone(),
                    score: train_views
                        .iter()
                        .map(|t| (t.center() - c.center()).norm())
                        .fold(f64::INFINITY, f64::min),
                    covered_fraction: 0.0,
                })
                .collect())
        }
        SelectionPolicy::WarprfImage | SelectionPolicy::WarprfDepth => {
            let prepared = SourceRenders::render(backend, train_views)?;
            score_prepared(backend, &prepared, candidates, *policy, options)
        }
    }
}

pub(crate) fn score_prepared(
    backend: &dyn RenderingBackend,
    prepared: &SourceRenders,
    candidates: &[View],
    policy: SelectionPolicy,
    options: &ScoreOptions,
) -> Result<Vec<ViewScore>> {
    candidates
        .par_iter()
        .map(|c| {
            let render = backend.render(c);
            match policy {
                SelectionPolicy::WarprfDepth => {
                    let map = prepared.pixel_uncertainty(c, &render, options)?;
                    Ok(ViewScore {
                        view_id: c.id.clone(),
                        score: map.sum_valid(),
                        covered_fraction: map.valid_count() as f64 / map.values.len() as f64,
                    })
                }
                _ => prepared.image_uncertainty(c, &render, options),
            }
        })
        .collect()
}

/// Highest score; ties go to the lexicographically smallest view id.
/// Non-finite scores are rejected rather than ordered.
pub fn select_next(scores: &[ViewScore]) -> Result<String> {
    if let Some(bad) = scores.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::NonFiniteScore(bad.view_id.clone()));
    }
    scores
        .iter()
        .max_by(|a, b| a.score.total_cmp(&b.score).then_with(|| b.view_id.cmp(&a.view_id)))
        .map(|s| s.view_id.clone())
        .ok_or(Error::Empty("scores"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::AnalyticScene;
    use crate::geometry::{Intrinsics, Pose};
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn vs(id: &str, s: f64) -> ViewScore {
        ViewScore {
            view_id: id.into(),
            score: s,
            covered_fraction: 0.0,
        }
    }

    #[test]
    fn select_single_and_ties() {
        assert_eq!(select_next(&[vs("only", 0.0)]).unwrap(), "only");
        let s = [vs("a", 0.2), vs("b", 0.9), vs("c", 0.9)];
        assert_eq!(select_next(&s).unwrap(), "b");
        let s = [vs("c", 0.9), vs("b", 0.9), vs("a", 0.2)];
        assert_eq!(select_next(&s).unwrap(), "b");
    }

    #[test]
    fn select_rejects_nan() {
        let s = [vs("a", 0.2), vs("b", f64::NAN)];
        assert!(matches!(select_next(&s), Err(Error::NonFiniteScore(id)) if id == "b"));
        assert!(select_next(&[]).is_err());
    }

    fn at(id: &str, x: f64) -> View {
        let k = Intrinsics::centered(10.0, 11, 11).unwrap();
        let pose = Pose::new(nalgebra::Matrix3::identity(), Vector3::new(x, 0.0, 0.0)).unwrap();
        View::new(id, k, pose).unwrap()
    }

    #[test]
    fn farthest_collinear() {
        let scene = AnalyticScene::default();
        let train = [at("t0", 0.0)];
        let cands = [at("c1", 1.0), at("c10", 10.0)];
        let scores = score_candidates(
            &scene,
            &train,
            &cands,
            &SelectionPolicy::Farthest,
            &ScoreOptions::default(),
        )
        .unwrap();
        assert_eq!(select_next(&scores).unwrap(), "c10");
    }

    #[test]
    fn random_is_deterministic() {
        let scene = AnalyticScene::default();
        let cands: Vec<View> = (0..20).map(|i| at(&format!("c{i:02}"), i as f64)).collect();
        let p = SelectionPolicy::Random { seed: 3 };
        let a = score_candidates(&scene, &[], &cands, &p, &ScoreOptions::default()).unwrap();
        let b = score_candidates(&scene, &[], &cands, &p, &ScoreOptions::default()).unwrap();
        assert_eq!(a, b);
        let other = score_candidates(
            &scene,
            &[],
            &cands,
            &SelectionPolicy::Random { seed: 4 },
            &ScoreOptions::default(),
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn empty_pool_and_missing_train() {
        let scene = AnalyticScene::default();
        assert!(score_candidates(
            &scene,
            &[at("t", 0.0)],
            &[],
            &SelectionPolicy::Farthest,
            &ScoreOptions::default()
        )
        .is_err());
        assert!(score_candidates(
            &scene,
            &[],
            &[at("c", 0.0)],
            &SelectionPolicy::WarprfImage,
            &ScoreOptions::default()
        )
        .is_err());
    }

    #[test]
    fn policy_parse() {
        assert_eq!(
            SelectionPolicy::parse("random", 9).unwrap(),
            SelectionPolicy::Random { seed: 9 }
        );
        assert_eq!(
            SelectionPolicy::parse("warprf_depth", 0).unwrap().name(),
            "warprf_depth"
        );
        assert!(SelectionPolicy::parse("best", 0).is_err());
    }

    proptest! {
        #[test]
        fn argmax_invariant_under_monotone_maps(raw in prop::collection::vec(-5.0..5.0f64, 1..30)) {
            let scores: Vec<ViewScore> = raw.iter().enumerate().map(|(i, &s)| vs(&format!("v{i:02}"), s)).collect();
            let mapped: Vec<ViewScore> = scores.iter().map(|s| vs(&s.view_id, s.score.exp() * 3.0 + 1.0)).collect();
            let cubed: Vec<ViewScore> = scores.iter().map(|s| vs(&s.view_id, s.score.powi(3))).collect();
            let a = select_next(&scores).unwrap();
            prop_assert_eq!(&a, &select_next(&mapped).unwrap());
            prop_assert_eq!(&a, &select_next(&cubed).unwrap());
        }
    }
}
