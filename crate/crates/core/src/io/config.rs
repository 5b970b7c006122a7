//! TOML experiment configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::active::{fibonacci_shell, fibonacci_sphere, ring, spread_subset, LoopConfig, RefineMode, SelectionPolicy};
use crate::backends::{presets, AnalyticScene, DegradationSpec, DegradedOracle, TrainConfig, VoxelBackend, VoxelField};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Intrinsics, Pose, Rgb, View};
use crate::uncertainty::ScoreOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub scene: SceneSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<DegradationSpec>,
    pub camera: CameraSpec,
    #[serde(default)]
    pub views: ViewSets,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default = "default_policy")]
    pub policy: PolicyName,
    #[serde(default)]
    pub uncertainty: ScoreOptions,
    #[serde(default)]
    pub active: ActiveSpec,
    /// Metric names kept in per-round outputs; empty keeps all.
    #[serde(default)]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_policy() -> PolicyName {
    PolicyName::WarprfImage
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    WarprfImage,
    WarprfDepth,
    Random,
    Farthest,
}

impl PolicyName {
    pub fn with_seed(self, seed: u64) -> SelectionPolicy {
        match self {
            PolicyName::WarprfImage => SelectionPolicy::WarprfImage,
            PolicyName::WarprfDepth => SelectionPolicy::WarprfDepth,
            PolicyName::Random => SelectionPolicy::Random { seed },
            PolicyName::Farthest => SelectionPolicy::Farthest,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match SelectionPolicy::parse(s, 0)? {
            SelectionPolicy::WarprfImage => PolicyName::WarprfImage,
            SelectionPolicy::WarprfDepth => PolicyName::WarprfDepth,
            SelectionPolicy::Random { .. } => PolicyName::Random,
            SelectionPolicy::Farthest => PolicyName::Farthest,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSpec {
    /// One of `textured_plane`, `two_primitives`, `desk`, `empty`.
    Preset { name: String },
    Inline {
        #[serde(default)]
        primitives: Vec<crate::backends::Primitive>,
        #[serde(default = "default_background")]
        background: Rgb,
        #[serde(default)]
        light: crate::backends::Light,
    },
    /// A saved voxel field used as the ground-truth renderer.
    Checkpoint { path: PathBuf },
}

fn default_background() -> Rgb {
    AnalyticScene::default().background
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub fx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
    pub width: usize,
    pub height: usize,
}

impl CameraSpec {
    pub fn intrinsics(&self) -> Result<Intrinsics> {
        Intrinsics::new(
            self.fx,
            self.fy.unwrap_or(self.fx),
            self.cx.unwrap_or((self.width as f64 - 1.0) / 2.0),
            self.cy.unwrap_or((self.height as f64 - 1.0) / 2.0),
            self.width,
            self.height,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSets {
    /// Source views (uncertainty, select) or initial training views (active loop).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<ViewSetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<ViewSetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<ViewSetSpec>,
    /// Views rendered or scored by the one-shot subcommands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ViewSetSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum ViewSetSpec {
    Explicit {
        views: Vec<ExplicitView>,
    },
    Ring {
        count: usize,
        radius: f64,
        #[serde(default)]
        elevation: f64,
        #[serde(default)]
        look_at: [f64; 3],
        #[serde(default)]
        phase: f64,
        prefix: String,
    },
    Sphere {
        count: usize,
        radius: f64,
        /// When set, camera distances spread over `[radius, radius_max]`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_max: Option<f64>,
        #[serde(default)]
        look_at: [f64; 3],
        #[serde(default)]
        phase: f64,
        prefix: String,
    },
}

/// A camera given either by `eye` + `look_at` (+ `up`) or by an explicit
/// camera-to-world `rotation` (row-major) and `translation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitView {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub look_at: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<[f64; 3]>,
}

impl ExplicitView {
    fn pose(&self) -> Result<Pose> {
        match (self.eye, self.look_at, self.rotation, self.translation) {
            (Some(eye), Some(at), None, None) => Pose::look_at(
                Vector3::from(eye),
                Vector3::from(at),
                Vector3::from(self.up.unwrap_or([0.0, 0.0, 1.0])),
            ),
            (None, None, Some(r), Some(t)) => {
                let m = Matrix3::from_row_slice(&r.concat());
                Pose::new(m, Vector3::from(t))
            }
            _ => Err(invalid(
                "views",
                format!(
                    "view `{}` needs either eye + look_at or rotation + translation",
                    self.id
                ),
            )),
        }
    }
}

impl ViewSetSpec {
    pub fn build(&self, intrinsics: Intrinsics) -> Result<Vec<View>> {
        match self {
            ViewSetSpec::Explicit { views } => views
                .iter()
                .map(|v| View::new(v.id.clone(), intrinsics, v.pose()?))
                .collect(),
            ViewSetSpec::Ring {
                count,
                radius,
                elevation,
                look_at,
                phase,
                prefix,
            } => ring(
                *count,
                *radius,
                *elevation,
                Vector3::from(*look_at),
                intrinsics,
                prefix,
                *phase,
            ),
            ViewSetSpec::Sphere {
                count,
                radius,
                radius_max: None,
                look_at,
                phase,
                prefix,
            } => fibonacci_sphere(*count, *radius, Vector3::from(*look_at), intrinsics, prefix, *phase),
            ViewSetSpec::Sphere {
                count,
                radius,
                radius_max: Some(rmax),
                look_at,
                phase,
                prefix,
            } => fibonacci_shell(
                *count,
                *radius,
                *rmax,
                Vector3::from(*look_at),
                intrinsics,
                prefix,
                *phase,
            ),
        }
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        let (count, radius) = match self {
            ViewSetSpec::Explicit { views } => (views.len(), 1.0),
            ViewSetSpec::Ring { count, radius, .. } | ViewSetSpec::Sphere { count, radius, .. } => (*count, *radius),
        };
        if count == 0 {
            return Err(invalid(field, "view count must be at least 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(field, "radius must be positive"));
        }
        if let ViewSetSpec::Sphere {
            radius_max: Some(rmax), ..
        } = self
        {
            if !(*rmax >= radius) {
                return Err(invalid(field, "radius_max must be at least radius"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// The exact analytic scene.
    #[default]
    Analytic,
    /// The analytic scene with `[degradation]` applied.
    Degraded,
    Voxel(VoxelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxelSpec {
    pub resolution: [usize; 3],
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
    pub step: f64,
    pub near: f64,
    pub far: f64,
    #[serde(default = "default_init_density")]
    pub init_density: f64,
    #[serde(default)]
    pub train: TrainConfig,
    /// Start from a saved field instead of a constant one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

fn default_init_density() -> f64 {
    0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActiveSpec {
    pub rounds: usize,
    pub fit_budget_per_round: usize,
    /// Number of initial training views taken from the pool when no
    /// `views.train` set is configured.
    pub initial_views: usize,
    pub refine: RefineMode,
    pub from_scratch: bool,
    pub cloud_threshold: f64,
}

impl Default for ActiveSpec {
    fn default() -> Self {
        Self {
            rounds: 10,
            fit_budget_per_round: 200,
            initial_views: 4,
            refine: RefineMode::Off,
            from_scratch: false,
            cloud_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Also write PFM/PPM dumps of rendered and uncertainty maps.
    pub dump_images: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            dump_images: false,
        }
    }
}

/// Environment variable overriding `output.dir`.
pub const OUT_DIR_ENV: &str = "MVUQ_OUT_DIR";

const METRIC_NAMES: [&str; 9] = [
    "psnr",
    "ssim",
    "depth_mae",
    "accuracy",
    "completion",
    "completion_ratio",
    "precision",
    "recall",
    "f1",
];

/// Read, parse and validate a config. Relative paths inside it are resolved
/// against the config file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    cfg.resolve_paths(base);
    cfg.check_files()?;
    Ok(cfg)
}

/// Parse and validate config text. File references are not checked.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.camera.intrinsics()?;
        if let SceneSpec::Preset { name } = &self.scene {
            preset_scene(name)?;
        }
        if let SceneSpec::Inline {
            primitives,
            background,
            light,
        } = &self.scene
        {
            AnalyticScene {
                primitives: primitives.clone(),
                background: *background,
                light: *light,
            }
            .validate()?;
        }
        if let Some(d) = &self.degradation {
            d.validate()?;
        }
        if self.backend == BackendSpec::Degraded && self.degradation.is_none() {
            return Err(invalid("degradation", "required by backend kind `degraded`"));
        }
        if matches!(self.scene, SceneSpec::Checkpoint { .. }) && matches!(self.backend, BackendSpec::Degraded) {
            return Err(invalid("backend", "`degraded` needs an analytic scene"));
        }
        for (name, set) in [
            ("views.train", &self.views.train),
            ("views.pool", &self.views.pool),
            ("views.eval", &self.views.eval),
            ("views.target", &self.views.target),
        ] {
            if let Some(s) = set {
                s.validate(name)?;
            }
        }
        if let BackendSpec::Voxel(v) = &self.backend {
            if v.train.ray_batch == 0 {
                return Err(invalid("backend.train.ray_batch", "must be at least 1"));
            }
            if !(v.train.learning_rate.is_finite() && v.train.learning_rate > 0.0) {
                return Err(invalid("backend.train.learning_rate", "must be positive"));
            }
            if v.checkpoint.is_none() {
                self.voxel_field(v)?;
            }
        }
        let a = &self.active;
        if a.rounds == 0 {
            return Err(invalid("active.rounds", "must be at least 1"));
        }
        if a.initial_views == 0 && self.views.train.is_none() {
            return Err(invalid("active.initial_views", "must be at least 1"));
        }
        if !(a.cloud_threshold.is_finite() && a.cloud_threshold > 0.0) {
            return Err(invalid("active.cloud_threshold", "must be positive"));
        }
        if let Some(m) = self.metrics.iter().find(|m| !METRIC_NAMES.contains(&m.as_str())) {
            return Err(invalid("metrics", format!("unknown metric `{m}`")));
        }
        if !(self.uncertainty.uncovered_penalty >= 0.0) {
            return Err(invalid("uncertainty.uncovered_penalty", "must be non-negative"));
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let SceneSpec::Checkpoint { path } = &mut self.scene {
            fix(path);
        }
        if let BackendSpec::Voxel(VoxelSpec {
            checkpoint: Some(p), ..
        }) = &mut self.backend
        {
            fix(p);
        }
    }

    fn check_files(&self) -> Result<()> {
        let mut paths = Vec::new();
        if let SceneSpec::Checkpoint { path } = &self.scene {
            paths.push(("scene.path", path));
        }
        if let BackendSpec::Voxel(VoxelSpec {
            checkpoint: Some(p), ..
        }) = &self.backend
        {
            paths.push(("backend.checkpoint", p));
        }
        for (field, p) in paths {
            if !p.is_file() {
                return Err(invalid(field, format!("file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        self.camera.intrinsics()
    }

    /// The analytic scene, if the scene is not a checkpoint.
    pub fn analytic_scene(&self) -> Result<Option<AnalyticScene>> {
        match &self.scene {
            SceneSpec::Preset { name } => preset_scene(name).map(Some),
            SceneSpec::Inline {
                primitives,
                background,
                light,
            } => {
                let scene = AnalyticScene {
                    primitives: primitives.clone(),
                    background: *background,
                    light: *light,
                };
                scene.validate()?;
                Ok(Some(scene))
            }
            SceneSpec::Checkpoint { .. } => Ok(None),
        }
    }

    /// Ground-truth renderer: the undegraded scene.
    pub fn ground_truth(&self) -> Result<Box<dyn crate::backends::TrainableBackend>> {
        match &self.scene {
            SceneSpec::Checkpoint { path } => {
                let field = super::read_checkpoint(path)?;
                Ok(Box::new(VoxelBackend::new(field, TrainConfig::default())))
            }
            _ => Ok(Box::new(self.analytic_scene()?.expect("analytic"))),
        }
    }

    /// The backend under evaluation (rendered, scored, or trained).
    pub fn backend(&self) -> Result<Box<dyn crate::backends::TrainableBackend>> {
        match &self.backend {
            BackendSpec::Analytic => self.ground_truth(),
            BackendSpec::Degraded => Ok(Box::new(DegradedOracle::new(
                self.analytic_scene()?.expect("validated"),
                self.degradation.clone().expect("validated"),
            )?)),
            BackendSpec::Voxel(v) => {
                let field = match &v.checkpoint {
                    Some(p) => super::read_checkpoint(p)?,
                    None => self.voxel_field(v)?,
                };
                Ok(Box::new(VoxelBackend::new(field, v.train)))
            }
        }
    }

    fn voxel_field(&self, v: &VoxelSpec) -> Result<VoxelField> {
        let mut f = VoxelField::new(
            v.resolution,
            v.bounds_min,
            v.bounds_max,
            v.step,
            v.near,
            v.far,
            v.init_density,
        )?;
        if let Some(s) = self.analytic_scene()? {
            f.background = s.background;
        }
        Ok(f)
    }

    fn view_set(&self, set: &Option<ViewSetSpec>) -> Result<Vec<View>> {
        match set {
            Some(s) => s.build(self.intrinsics()?),
            None => Ok(Vec::new()),
        }
    }

    pub fn train_views(&self) -> Result<Vec<View>> {
        self.view_set(&self.views.train)
    }

    pub fn pool_views(&self) -> Result<Vec<View>> {
        self.view_set(&self.views.pool)
    }

    pub fn eval_views(&self) -> Result<Vec<View>> {
        self.view_set(&self.views.eval)
    }

    pub fn target_views(&self) -> Result<Vec<View>> {
        self.view_set(&self.views.target)
    }

    /// Loop configuration. Without a `views.train` set, `active.initial_views`
    /// views spread over the pool become the initial set and leave the pool.
    pub fn loop_config(&self) -> Result<LoopConfig> {
        let mut pool = self.pool_views()?;
        let initial = if self.views.train.is_some() {
            self.train_views()?
        } else {
            let mut idx = spread_subset(&pool, self.active.initial_views);
            if idx.len() < self.active.initial_views {
                return Err(invalid("active.initial_views", "larger than the candidate pool"));
            }
            idx.sort_unstable();
            idx.iter()
                .rev()
                .map(|&i| pool.remove(i))
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect()
        };
        Ok(LoopConfig {
            initial_views: initial,
            candidate_pool: pool,
            eval_views: self.eval_views()?,
            rounds: self.active.rounds,
            fit_budget_per_round: self.active.fit_budget_per_round,
            refine: self.active.refine,
            seed: self.seed,
            from_scratch: self.active.from_scratch,
            score_options: self.uncertainty,
            cloud_threshold: self.active.cloud_threshold,
        })
    }

    pub fn selection_policy(&self) -> SelectionPolicy {
        self.policy.with_seed(self.seed)
    }
}

pub fn preset_scene(name: &str) -> Result<AnalyticScene> {
    match name {
        "textured_plane" => Ok(presets::textured_plane(3.0, 2.0, 0.25)),
        "two_primitives" => Ok(presets::two_primitives()),
        "desk" => Ok(presets::desk()),
        "empty" => Ok(AnalyticScene::default()),
        other => Err(invalid(
            "scene.name",
            format!("unknown preset `{other}` (expected textured_plane, two_primitives, desk, empty)"),
        )),
    }
}
