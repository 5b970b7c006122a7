use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::backends::RenderingBackend;
use crate::error::{invalid, Error, Result};
use crate::geometry::View;
use crate::uncertainty::{ScoreOptions, SourceRenders};

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub view: View,
    pub score: f64,
    pub initial_score: f64,
    pub evaluations: usize,
    pub accepted_moves: usize,
}

/// Translation and rotation step sizes for a stencil radius `r`: cameras move
/// `r` along each camera axis and turn `r / 2` radians about camera x and y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    pub translation: f64,
    pub rotation: f64,
}

impl Stencil {
    pub fn for_radius(r: f64) -> Self {
        Self {
            translation: r,
            rotation: 0.5 * r,
        }
    }

    fn neighbours(&self, view: &View) -> Vec<View> {
        let mut out = Vec::with_capacity(10);
        for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
            for sign in [1.0, -1.0] {
                out.push(view.with_pose(view.pose.translated_local(axis * (sign * self.translation))));
            }
        }
        for axis in [Vector3::x(), Vector3::y()] {
            for sign in [1.0, -1.0] {
                out.push(view.with_pose(view.pose.rotated_local(axis, sign * self.rotation)));
            }
        }
        out
    }
}

/// Derivative-free ascent of the image-level score starting at `candidate`.
/// Each iteration evaluates the ten stencil neighbours; the best one is taken
/// only if it strictly improves, otherwise the radius halves. The returned
/// score is therefore never below the starting score.
pub fn refine_pose(
    backend: &dyn RenderingBackend,
    train_views: &[View],
    candidate: &View,
    radius: f64,
    iterations: usize,
    options: &ScoreOptions,
) -> Result<RefineOutcome> {
    let prepared = SourceRenders::render(backend, train_views)?;
    refine_prepared(backend, &prepared, candidate, radius, iterations, options)
}

pub(crate) fn refine_prepared(
    backend: &dyn RenderingBackend,
    prepared: &SourceRenders,
    candidate: &View,
    radius: f64,
    iterations: usize,
    options: &ScoreOptions,
) -> Result<RefineOutcome> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid("radius", "must be positive"));
    }
    let score = |v: &View| -> Result<f64> {
        let s = prepared.image_uncertainty(v, &backend.render(v), options)?.score;
        if s.is_finite() {
            Ok(s)
        } else {
            Err(Error::NonFiniteScore(v.id.clone()))
        }
    };
    let initial_score = score(candidate)?;
    let mut best = candidate.clone();
    let mut best_score = initial_score;
    let mut r = radius;
    let mut evaluations = 1;
    let mut accepted_moves = 0;
    for _ in 0..iterations {
        let mut step: Option<(View, f64)> = None;
        for n in Stencil::for_radius(r).neighbours(&best) {
            let s = score(&n)?;
            evaluations += 1;
            if step.as_ref().is_none_or(|(_, bs)| s > *bs) {
                step = Some((n, s));
            }
        }
        match step {
            Some((v, s)) if s > best_score => {
                best = v;
                best_score = s;
                accepted_moves += 1;
            }
            _ => r *= 0.5,
        }
    }
    Ok(RefineOutcome {
        view: best,
        score: best_score,
        initial_score,
        evaluations,
        accepted_moves,
    })
}
