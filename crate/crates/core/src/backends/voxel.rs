//! A dense voxel radiance field rendered with alpha compositing and trained
//! with a photometric loss.
//!
//! Density and color are stored as raw parameters on a regular lattice of
//! nodes spanning `bounds`. Activation happens per node (softplus for
//! density, sigmoid for color) and activated values are interpolated
//! trilinearly at each ray sample, so gradients with respect to the raw
//! parameters are exact through both the compositing recurrence and the
//! activations.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Rendering, RenderingBackend, TrainableBackend, TrainingImage};
use crate::error::{invalid, Error, Result};
use crate::geometry::{DepthMap, ImageBuffer, Rgb, View};
use crate::rng::{streams, CounterRng};

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One ray sample fed to the compositor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    /// Sample position along the ray (planar depth for camera rays).
    pub t: f64,
    /// Metric length of the ray segment the sample represents.
    pub delta: f64,
    pub sigma: f64,
    pub color: Rgb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub color: Rgb,
    /// `sum_i w_i t_i`.
    pub depth: f64,
    /// `sum_i w_i`.
    pub weight_sum: f64,
    /// Per-sample transmittance `T_i` (before sample `i`).
    pub transmittance: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Front-to-back alpha compositing; the residual transmittance is filled
/// with `background`.
pub fn composite(samples: &[RaySample], background: Rgb) -> Composite {
    let mut color = [0.0; 3];
    let mut depth = 0.0;
    let mut weight_sum = 0.0;
    let mut transmittance = Vec::with_capacity(samples.len());
    let mut weights = Vec::with_capacity(samples.len());
    let mut optical_depth: f64 = 0.0;
    for s in samples {
        let t_i = (-optical_depth).exp();
        let tau = s.sigma * s.delta;
        let alpha = -(-tau).exp_m1();
        let w = alpha * t_i;
        for (acc, c) in color.iter_mut().zip(s.color) {
            *acc += w * c;
        }
        depth += w * s.t;
        weight_sum += w;
        transmittance.push(t_i);
        weights.push(w);
        optical_depth += tau;
    }
    let residual = (-optical_depth).exp();
    for (acc, b) in color.iter_mut().zip(background) {
        *acc += residual * b;
    }
    Composite {
        color,
        depth,
        weight_sum,
        transmittance,
        weights,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelField {
    /// Lattice nodes per axis (each ≥ 2).
    pub resolution: [usize; 3],
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
    /// Raw density per node; activated with softplus.
    pub density: Vec<f64>,
    /// Raw RGB per node (node-major); activated with sigmoid.
    pub color: Vec<f64>,
    /// Sample spacing along `t`.
    pub step: f64,
    pub near: f64,
    pub far: f64,
    pub background: Rgb,
    /// Minimum accumulated weight for a rendered depth to count as valid.
    pub depth_weight_threshold: f64,
}

/// Node indices and trilinear weights for one point (at most 8 entries).
type Stencil = ([usize; 8], [f64; 8], usize);

impl VoxelField {
    pub fn new(
        resolution: [usize; 3],
        bounds_min: [f64; 3],
        bounds_max: [f64; 3],
        step: f64,
        near: f64,
        far: f64,
        init_density: f64,
    ) -> Result<Self> {
        let n: usize = resolution.iter().product();
        let field = Self {
            resolution,
            bounds_min,
            bounds_max,
            density: vec![init_density; n],
            color: vec![0.0; 3 * n],
            step,
            near,
            far,
            background: [0.0; 3],
            depth_weight_threshold: 0.5,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution.iter().any(|&r| r < 2) {
            return Err(invalid("resolution", "need at least 2 nodes per axis"));
        }
        if !(0..3).all(|k| self.bounds_min[k] < self.bounds_max[k]) {
            return Err(invalid("bounds", "min must be below max on every axis"));
        }
        if !(self.near < self.far) {
            return Err(Error::Config(format!(
                "near ({}) must be below far ({})",
                self.near, self.far
            )));
        }
        if !(self.step > 0.0) {
            return Err(invalid("step", "must be positive"));
        }
        let n = self.node_count();
        if self.density.len() != n || self.color.len() != 3 * n {
            return Err(invalid("density", "parameter arrays do not match resolution"));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn param_count(&self) -> usize {
        4 * self.node_count()
    }

    pub fn sample_ts(&self) -> impl Iterator<Item = f64> + '_ {
        let n = ((self.far - self.near) / self.step).floor() as usize;
        (0..n)
            .map(move |i| self.near + (i as f64 + 0.5) * self.step)
            .filter(move |&t| t < self.far)
    }

    fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution[1] + j) * self.resolution[0] + i
    }

    fn stencil(&self, p: &Vector3<f64>) -> Option<Stencil> {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let span = self.bounds_max[a] - self.bounds_min[a];
            let g = (p[a] - self.bounds_min[a]) / span * (self.resolution[a] - 1) as f64;
            if !(g >= 0.0 && g <= (self.resolution[a] - 1) as f64) {
                return None;
            }
            let b = (g.floor() as usize).min(self.resolution[a] - 2);
            base[a] = b;
            frac[a] = g - b as f64;
        }
        let mut idx = [0usize; 8];
        let mut w = [0.0; 8];
        let mut n = 0;
        for corner in 0..8 {
            let (di, dj, dk) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let wi = if di == 1 { frac[0] } else { 1.0 - frac[0] };
            let wj = if dj == 1 { frac[1] } else { 1.0 - frac[1] };
            let wk = if dk == 1 { frac[2] } else { 1.0 - frac[2] };
            let weight = wi * wj * wk;
            if weight > 0.0 {
                idx[n] = self.node_index(base[0] + di, base[1] + dj, base[2] + dk);
                w[n] = weight;
                n += 1;
            }
        }
        Some((idx, w, n))
    }

    /// `t` range where the ray is inside the lattice bounds.
    fn clip(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if d[a].abs() < 1e-300 {
                if o[a] < self.bounds_min[a] || o[a] > self.bounds_max[a] {
                    return None;
                }
                continue;
            }
            let ta = (self.bounds_min[a] - o[a]) / d[a];
            let tb = (self.bounds_max[a] - o[a]) / d[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
        (t0 <= t1).then_some((t0, t1))
    }

    pub fn activated(&self) -> Activated {
        Activated {
            density: self.density.iter().map(|&x| softplus(x)).collect(),
            color: self.color.iter().map(|&x| sigmoid(x)).collect(),
        }
    }

    /// Samples along a ray, each with its interpolation stencil.
    fn march(&self, act: &Activated, o: &Vector3<f64>, d: &Vector3<f64>) -> Vec<(RaySample, Option<Stencil>)> {
        let Some((t_in, t_out)) = self.clip(o, d) else {
            return Vec::new();
        };
        let delta = self.step * d.norm();
        self.sample_ts()
            .filter(|&t| t >= t_in && t <= t_out)
            .map(|t| {
                let p = o + d * t;
                let st = self.stencil(&p);
                let (sigma, color) = match &st {
                    Some((idx, w, n)) => {
                        let mut sigma = 0.0;
                        let mut color = [0.0; 3];
                        for m in 0..*n {
                            sigma += w[m] * act.density[idx[m]];
                            for (ch, c) in color.iter_mut().enumerate() {
                                *c += w[m] * act.color[3 * idx[m] + ch];
                            }
                        }
                        (sigma, color)
                    }
                    None => (0.0, [0.0; 3]),
                };
                (RaySample { t, delta, sigma, color }, st)
            })
            .collect()
    }

    pub fn render_ray(&self, act: &Activated, o: &Vector3<f64>, d: &Vector3<f64>) -> Composite {
        let samples: Vec<RaySample> = self.march(act, o, d).into_iter().map(|(s, _)| s).collect();
        composite(&samples, self.background)
    }

    pub fn render(&self, view: &View) -> Rendering {
        let act = self.activated();
        let (w, h) = (view.width(), view.height());
        let out: Vec<Composite> = (0..w * h)
            .into_par_iter()
            .map(|i| {
                let (o, d) = super::scene::AnalyticScene::camera_ray(view, i);
                self.render_ray(&act, &o, &d)
            })
            .collect();
        let mut image = ImageBuffer::filled(w, h, self.background);
        let mut depth = DepthMap::invalid(w, h);
        for (i, c) in out.into_iter().enumerate() {
            image.set(i, c.color);
            if c.weight_sum >= self.depth_weight_threshold {
                depth.set(i, c.depth);
            }
        }
        Rendering { image, depth }
    }

    /// Photometric loss `sum_r |C(r) - C_gt(r)|^2` over `rays` and its exact
    /// gradient with respect to the raw parameters (density block first,
    /// then color).
    pub fn loss_and_grad(&self, rays: &[TrainRay]) -> (f64, Vec<f64>) {
        let act = self.activated();
        let per_ray: Vec<(f64, Vec<(usize, f64)>)> = rays.par_iter().map(|r| self.ray_backward(&act, r)).collect();
        let n = self.node_count();
        let mut grad = vec![0.0; 4 * n];
        let mut loss = 0.0;
        // fixed reduction order: ray order, then entry order
        for (l, entries) in per_ray {
            loss += l;
            for (k, g) in entries {
                grad[k] += g;
            }
        }
        (loss, grad)
    }

    fn ray_backward(&self, act: &Activated, ray: &TrainRay) -> (f64, Vec<(usize, f64)>) {
        let marched = self.march(act, &ray.origin, &ray.direction);
        let samples: Vec<RaySample> = marched.iter().map(|(s, _)| *s).collect();
        let comp = composite(&samples, self.background);
        let resid: Rgb = std::array::from_fn(|c| comp.color[c] - ray.target[c]);
        let loss = resid.iter().map(|r| r * r).sum::<f64>();
        let g: Rgb = resid.map(|r| 2.0 * r);
        let dot = |c: &Rgb| g[0] * c[0] + g[1] * c[1] + g[2] * c[2];

        let m = samples.len();
        let total_tau: f64 = samples.iter().map(|s| s.sigma * s.delta).sum();
        let residual_t = (-total_tau).exp();
        // suffix[i] = sum_{j > i} w_j (g . c_j)
        let mut suffix = vec![0.0; m + 1];
        for i in (0..m).rev() {
            suffix[i] = suffix[i + 1] + comp.weights[i] * dot(&samples[i].color);
        }
        let bg_term = residual_t * dot(&self.background);

        let n = self.node_count();
        let mut entries = Vec::new();
        for (i, (s, st)) in marched.iter().enumerate() {
            let Some((idx, w, cnt)) = st else { continue };
            let t_next = comp.transmittance[i] * (-s.sigma * s.delta).exp();
            let d_sigma = s.delta * (t_next * dot(&s.color) - suffix[i + 1] - bg_term);
            for k in 0..*cnt {
                let node = idx[k];
                let dsp = sigmoid(self.density[node]);
                entries.push((node, d_sigma * w[k] * dsp));
                for ch in 0..3 {
                    let a = act.color[3 * node + ch];
                    let dc = g[ch] * comp.weights[i] * w[k] * a * (1.0 - a);
                    entries.push((n + 3 * node + ch, dc));
                }
            }
        }
        (loss, entries)
    }

    /// Flat view of the raw parameters in gradient order.
    pub fn param(&self, k: usize) -> f64 {
        let n = self.node_count();
        if k < n {
            self.density[k]
        } else {
            self.color[k - n]
        }
    }

    pub fn param_mut(&mut self, k: usize) -> &mut f64 {
        let n = self.node_count();
        if k < n {
            &mut self.density[k]
        } else {
            &mut self.color[k - n]
        }
    }
}

#[derive(Debug, Clone)]
pub struct Activated {
    pub density: Vec<f64>,
    pub color: Vec<f64>,
}

/// A supervised camera ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRay {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
    pub target: Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub ray_batch: usize,
    #[serde(default)]
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            ray_batch: 256,
            momentum: 0.0,
        }
    }
}

/// SGD on the photometric loss. Returns the mean per-ray loss of every step.
/// Ray `r` of step `s` is drawn from the counter stream at `(seed, s * batch + r)`.
pub fn train(
    field: &mut VoxelField,
    views: &[TrainingImage],
    steps: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if views.is_empty() {
        return Err(Error::Empty("training views"));
    }
    if config.ray_batch == 0 {
        return Err(invalid("ray_batch", "must be at least 1"));
    }
    for tv in views {
        crate::geometry::check_same_size((tv.view.width(), tv.view.height()), (tv.image.width, tv.image.height))?;
    }
    let offsets: Vec<usize> = views
        .iter()
        .scan(0usize, |acc, v| {
            let start = *acc;
            *acc += v.image.len();
            Some(start)
        })
        .collect();
    let total: usize = views.iter().map(|v| v.image.len()).sum();
    let rng = CounterRng::new(seed);
    let mut velocity = vec![0.0; field.param_count()];
    let mut trace = Vec::with_capacity(steps);
    for step in 0..steps {
        let rays: Vec<TrainRay> = (0..config.ray_batch)
            .filter_map(|r| {
                let draw = rng.u64(streams::RAY_BATCH, (step * config.ray_batch + r) as u64);
                let flat = (draw % total as u64) as usize;
                let vi = offsets.partition_point(|&o| o <= flat) - 1;
                let tv = &views[vi];
                let px = flat - offsets[vi];
                if !tv.image.valid[px] {
                    return None;
                }
                let (origin, direction) = super::scene::AnalyticScene::camera_ray(&tv.view, px);
                Some(TrainRay {
                    origin,
                    direction,
                    target: tv.image.values[px],
                })
            })
            .collect();
        if rays.is_empty() {
            trace.push(0.0);
            continue;
        }
        let (loss, grad) = field.loss_and_grad(&rays);
        let scale = config.learning_rate / rays.len() as f64;
        for (k, g) in grad.into_iter().enumerate() {
            if g == 0.0 && velocity[k] == 0.0 {
                continue;
            }
            velocity[k] = config.momentum * velocity[k] + g;
            *field.param_mut(k) -= scale * velocity[k];
        }
        trace.push(loss / rays.len() as f64);
    }
    Ok(trace)
}

/// Voxel field plus its training hyperparameters, usable as a backend.
#[derive(Debug, Clone)]
pub struct VoxelBackend {
    pub field: VoxelField,
    pub initial: VoxelField,
    pub train: TrainConfig,
}

impl VoxelBackend {
    pub fn new(field: VoxelField, train: TrainConfig) -> Self {
        Self {
            initial: field.clone(),
            field,
            train,
        }
    }
}

impl RenderingBackend for VoxelBackend {
    fn render(&self, view: &View) -> Rendering {
        self.field.render(view)
    }
}

impl TrainableBackend for VoxelBackend {
    fn fit(&mut self, data: &[TrainingImage], steps: usize, seed: u64) -> Result<Vec<f64>> {
        train(&mut self.field, data, steps, &self.train, seed)
    }

    fn reset(&mut self) {
        self.field = self.initial.clone();
    }
}
