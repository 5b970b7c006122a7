//! `mvuq` command-line driver.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mvuq::active::{evaluate_views, run_active_loop, score_candidates, select_next};
use mvuq::backends::TrainableBackend;
use mvuq::io::{self, ExperimentConfig, PolicyName, ResultBundle};
use mvuq::metrics::{ause_report, depth_mae, psnr, ssim};
use mvuq::uncertainty::SourceRenders;

#[derive(Parser, Debug)]
#[command(
    name = "mvuq",
    version,
    about = "Multi-view consistency uncertainty for radiance fields"
)]
struct Cli {
    /// Output directory (overrides MVUQ_OUT_DIR and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel rendering and scoring.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UncertaintyMode {
    /// Per-pixel depth consistency maps (PFM).
    Pixel,
    /// Image-level color reprojection scores (CSV).
    Image,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the target views of the configured backend to PPM/PFM.
    Render {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Uncertainty of target views against the training views.
    Uncertainty {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "pixel")]
        mode: UncertaintyMode,
    },
    /// AUSE of an uncertainty map against an error map.
    Ause {
        #[arg(long)]
        uncertainty: PathBuf,
        #[arg(long)]
        error: PathBuf,
        /// Optional PFM whose valid pixels restrict the evaluation.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = mvuq::metrics::DEFAULT_BINS)]
        bins: usize,
    },
    /// Score the candidate pool once and print the selected view.
    Select {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        policy: Option<String>,
    },
    /// Run the active view-selection loop.
    ActiveLoop {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Image, depth and point-cloud metrics.
    ///
    /// With `--config`, compares the backend against the ground truth on the
    /// eval views. Otherwise compares `--pred` with `--gt` (both PPM or both PFM).
    Metrics {
        #[arg(long, conflicts_with_all = ["pred", "gt"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "gt")]
        pred: Option<PathBuf>,
        #[arg(long, requires = "pred")]
        gt: Option<PathBuf>,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn load(cli: &Cli, args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = io::load_config(&args.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn bundle_for(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Result<ResultBundle> {
    let configured = cfg.map_or_else(|| PathBuf::from("out"), |c| c.output.dir.clone());
    let dir = io::resolve_out_dir(cli.out.as_deref(), &configured);
    ResultBundle::create(&dir).with_context(|| format!("creating {}", dir.display()))
}

fn finish(
    bundle: ResultBundle,
    command: &str,
    cfg: Option<&ExperimentConfig>,
    seed: u64,
    values: BTreeMap<String, f64>,
) -> Result<()> {
    let hash = cfg.map(io::config_hash).transpose()?;
    bundle.finish(command, hash, seed, values)?;
    Ok(())
}

fn write_config(bundle: &mut ResultBundle, cfg: &ExperimentConfig) -> Result<()> {
    bundle.write("config.toml", io::to_toml(cfg)?.as_bytes())?;
    Ok(())
}

fn require(views: Vec<mvuq::View>, what: &str) -> Result<Vec<mvuq::View>> {
    if views.is_empty() {
        bail!("config defines no `views.{what}` set");
    }
    Ok(views)
}

fn render(cli: &Cli, args: &ConfigArgs) -> Result<()> {
    let cfg = load(cli, args)?;
    let backend = cfg.backend()?;
    let mut views = cfg.target_views()?;
    if views.is_empty() {
        views = require(cfg.train_views()?, "target")?;
    }
    let mut bundle = bundle_for(cli, Some(&cfg))?;
    write_config(&mut bundle, &cfg)?;
    for v in &views {
        let r = backend.render(v);
        bundle.write(&format!("render/{}.ppm", v.id), &io::encode_ppm(&r.image))?;
        bundle.write(&format!("render/{}_depth.pfm", v.id), &io::encode_scalar_pfm(&r.depth))?;
    }
    println!("rendered {} view(s) to {}", views.len(), bundle.root().display());
    finish(bundle, "render", Some(&cfg), cfg.seed, BTreeMap::new())
}

fn uncertainty(cli: &Cli, args: &ConfigArgs, mode: UncertaintyMode) -> Result<()> {
    let cfg = load(cli, args)?;
    let backend = cfg.backend()?;
    let sources = require(cfg.train_views()?, "train")?;
    let mut targets = cfg.target_views()?;
    if targets.is_empty() {
        targets = require(cfg.pool_views()?, "target")?;
    }
    let prepared = SourceRenders::render(backend.as_ref(), &sources)?;
    let mut bundle = bundle_for(cli, Some(&cfg))?;
    write_config(&mut bundle, &cfg)?;
    let mut scores = Vec::with_capacity(targets.len());
    for t in &targets {
        let r = backend.render(t);
        match mode {
            UncertaintyMode::Pixel => {
                let map = prepared.pixel_uncertainty(t, &r, &cfg.uncertainty)?;
                bundle.write(
                    &format!("uncertainty/{}.pfm", t.id),
                    &io::encode_scalar_pfm(&map.as_depth_like()),
                )?;
                scores.push(mvuq::uncertainty::ViewScore {
                    view_id: t.id.clone(),
                    score: map.mean_valid().unwrap_or(0.0),
                    covered_fraction: map.valid_count() as f64 / map.values.len() as f64,
                });
            }
            UncertaintyMode::Image => scores.push(prepared.image_uncertainty(t, &r, &cfg.uncertainty)?),
        }
    }
    bundle.write("scores.csv", &io::scores_csv(&scores)?)?;
    for s in &scores {
        println!("{}\t{}", s.view_id, s.score);
    }
    finish(bundle, "uncertainty", Some(&cfg), cfg.seed, BTreeMap::new())
}

fn ause_cmd(cli: &Cli, u: &Path, e: &Path, mask: Option<&Path>, bins: usize) -> Result<()> {
    let um = io::read_pfm(u)?;
    let em = io::read_pfm(e)?;
    if (um.width, um.height) != (em.width, em.height) {
        bail!(
            "uncertainty is {}x{} but error is {}x{}",
            um.width,
            um.height,
            em.width,
            em.height
        );
    }
    let mut valid: Vec<bool> = um.valid.iter().zip(&em.valid).map(|(a, b)| *a && *b).collect();
    if let Some(m) = mask {
        let mm = io::read_pfm(m)?;
        if (mm.width, mm.height) != (um.width, um.height) {
            bail!("mask size differs from the uncertainty map");
        }
        for (v, m) in valid.iter_mut().zip(&mm.valid) {
            *v &= *m;
        }
    }
    let report = ause_report(&um.values, &em.values, &valid, bins)?;
    let mut bundle = bundle_for(cli, None)?;
    bundle.write("sparsification.csv", &io::curve_csv(&report)?)?;
    println!("{:?}", report.ause);
    let values = BTreeMap::from([("ause".to_string(), report.ause)]);
    finish(bundle, "ause", None, cli.seed.unwrap_or(0), values)
}

fn apply_policy(cfg: &mut ExperimentConfig, policy: Option<&str>) -> Result<()> {
    if let Some(p) = policy {
        cfg.policy = PolicyName::parse(p)?;
    }
    Ok(())
}

fn select(cli: &Cli, args: &ConfigArgs, policy: Option<&str>) -> Result<()> {
    let mut cfg = load(cli, args)?;
    apply_policy(&mut cfg, policy)?;
    let backend = cfg.backend()?;
    let train = require(cfg.train_views()?, "train")?;
    let pool = require(cfg.pool_views()?, "pool")?;
    let scores = score_candidates(
        backend.as_ref(),
        &train,
        &pool,
        &cfg.selection_policy(),
        &cfg.uncertainty,
    )?;
    let best = select_next(&scores)?;
    let mut bundle = bundle_for(cli, Some(&cfg))?;
    write_config(&mut bundle, &cfg)?;
    bundle.write("scores.csv", &io::scores_csv(&scores)?)?;
    println!("{best}");
    finish(bundle, "select", Some(&cfg), cfg.seed, BTreeMap::new())
}

fn active_loop(cli: &Cli, args: &ConfigArgs, policy: Option<&str>, rounds: Option<usize>) -> Result<()> {
    let mut cfg = load(cli, args)?;
    apply_policy(&mut cfg, policy)?;
    if let Some(r) = rounds {
        cfg.active.rounds = r;
    }
    cfg.validate()?;
    let gt = cfg.ground_truth()?;
    let mut backend: Box<dyn TrainableBackend> = cfg.backend()?;
    let loop_cfg = cfg.loop_config()?;
    let mut bundle = bundle_for(cli, Some(&cfg))?;
    write_config(&mut bundle, &cfg)?;
    let (records, failure) = match run_active_loop(backend.as_mut(), gt.as_ref(), &loop_cfg, &cfg.selection_policy()) {
        Ok(r) => (r, None),
        Err(e) => (e.completed, Some(e.error)),
    };
    bundle.write("rounds.jsonl", &io::rounds_jsonl(&records, &cfg.metrics)?)?;
    bundle.write("rounds.csv", &io::rounds_csv(&records, &cfg.metrics)?)?;
    let mut poses: Vec<(String, mvuq::Pose)> = loop_cfg.initial_views.iter().map(|v| (v.id.clone(), v.pose)).collect();
    poses.extend(records.iter().map(|r| (r.selected_view.clone(), r.selected_pose)));
    bundle.write("trajectory.csv", &io::poses_csv(&poses)?)?;
    if cfg.output.dump_images {
        for v in &loop_cfg.eval_views {
            let r = backend.render(v);
            bundle.write(&format!("render/{}.ppm", v.id), &io::encode_ppm(&r.image))?;
            bundle.write(&format!("render/{}_depth.pfm", v.id), &io::encode_scalar_pfm(&r.depth))?;
        }
    }
    let mut values = BTreeMap::new();
    if let Some(last) = records.last() {
        for (k, v) in &last.metrics_after_fit {
            values.insert(format!("final_{k}"), *v);
        }
    }
    finish(bundle, "active-loop", Some(&cfg), cfg.seed, values)?;
    for r in &records {
        println!("round {}\t{}", r.round, r.selected_view);
    }
    match failure {
        Some(e) => Err(anyhow!("active loop stopped after {} round(s): {e}", records.len())),
        None => Ok(()),
    }
}

fn metrics_cmd(cli: &Cli, config: Option<&Path>, pred: Option<&Path>, gt: Option<&Path>) -> Result<()> {
    let mut values = BTreeMap::new();
    match (config, pred, gt) {
        (Some(c), _, _) => {
            let cfg = load(
                cli,
                &ConfigArgs {
                    config: c.to_path_buf(),
                },
            )?;
            let model = cfg.backend()?;
            let reference = cfg.ground_truth()?;
            let views = require(cfg.eval_views()?, "eval")?;
            let mut rows = Vec::new();
            for v in &views {
                let m = evaluate_views(
                    model.as_ref(),
                    reference.as_ref(),
                    std::slice::from_ref(v),
                    cfg.active.cloud_threshold,
                )?;
                rows.push((v.id.clone(), m));
            }
            let all = evaluate_views(model.as_ref(), reference.as_ref(), &views, cfg.active.cloud_threshold)?;
            let mut bundle = bundle_for(cli, Some(&cfg))?;
            write_config(&mut bundle, &cfg)?;
            bundle.write("metrics.csv", &io::metrics_csv(&rows)?)?;
            for (k, v) in &all {
                println!("{k}\t{v}");
            }
            values.extend(all);
            finish(bundle, "metrics", Some(&cfg), cfg.seed, values)
        }
        (None, Some(p), Some(g)) => {
            let is_ppm = |x: &Path| x.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm"));
            if is_ppm(p) && is_ppm(g) {
                let a = io::read_ppm(p)?;
                let b = io::read_ppm(g)?;
                values.insert("psnr".into(), psnr(&a, &b)?);
                if a.width >= 11 && a.height >= 11 {
                    values.insert("ssim".into(), ssim(&a, &b)?);
                }
            } else {
                let a = io::read_pfm(p)?;
                let b = io::read_pfm(g)?;
                values.insert("depth_mae".into(), depth_mae(&a, &b)?);
            }
            for (k, v) in &values {
                println!("{k}\t{v}");
            }
            let mut bundle = bundle_for(cli, None)?;
            bundle.write(
                "metrics.csv",
                &io::metrics_csv(&[("pair".to_string(), values.clone())])?,
            )?;
            finish(bundle, "metrics", None, cli.seed.unwrap_or(0), values)
        }
        _ => bail!("metrics needs --config or both --pred and --gt"),
    }
}

fn selftest() -> Result<()> {
    let checks = mvuq::selftest::run_all();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed > 0 {
        bail!("{failed} of {} self-checks failed", checks.len());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Render { cfg } => render(cli, cfg),
        Command::Uncertainty { cfg, mode } => uncertainty(cli, cfg, *mode),
        Command::Ause {
            uncertainty,
            error,
            mask,
            bins,
        } => ause_cmd(cli, uncertainty, error, mask.as_deref(), *bins),
        Command::Select { cfg, policy } => select(cli, cfg, policy.as_deref()),
        Command::ActiveLoop { cfg, policy, rounds } => active_loop(cli, cfg, policy.as_deref(), *rounds),
        Command::Metrics { config, pred, gt } => metrics_cmd(cli, config.as_deref(), pred.as_deref(), gt.as_deref()),
        Command::Selftest => selftest(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
