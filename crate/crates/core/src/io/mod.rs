//! Configuration, image and checkpoint files, and result emission.

mod checkpoint;
mod config;
mod images;
mod results;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use config::{
    load_config, parse_config, preset_scene, to_toml, ActiveSpec, BackendSpec, CameraSpec, ExperimentConfig,
    ExplicitView, OutputSpec, PolicyName, SceneSpec, ViewSetSpec, ViewSets, VoxelSpec, OUT_DIR_ENV,
};
pub use images::{
    decode_ppm, decode_scalar_pfm, encode_ppm, encode_scalar_pfm, read_pfm, read_ppm, write_pfm, write_ppm, Pfm,
};
pub use results::{
    curve_csv, metrics_csv, poses_csv, rounds_csv, rounds_jsonl, scores_csv, sha256_hex, verify_summary,
    version_string, FileEntry, ResultBundle, Summary, CSV_SCHEMA,
};

use std::path::{Path, PathBuf};

/// Output directory: an explicit path wins, then `MVUQ_OUT_DIR`, then the
/// config value.
pub fn resolve_out_dir(explicit: Option<&Path>, configured: &Path) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    }
}

/// SHA-256 of the canonical TOML serialization of a config.
pub fn config_hash(cfg: &ExperimentConfig) -> crate::Result<String> {
    Ok(sha256_hex(to_toml(cfg)?.as_bytes()))
}
