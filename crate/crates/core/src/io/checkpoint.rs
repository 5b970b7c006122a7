//! Voxel-field checkpoints: a text header followed by raw little-endian f32
//! density then color arrays.
//!
//! ```text
//! mvuq-voxel 1
//! resolution 8 8 8
//! bounds_min -1 -1 -1
//! bounds_max 1 1 1
//! step 0.05
//! near 0.5
//! far 6
//! background 1 1 1
//! depth_weight_threshold 0.5
//! end
//! <density: n f32><color: 3n f32>
//! ```

use std::path::Path;

use crate::backends::VoxelField;
use crate::error::{Error, Result};

const MAGIC: &str = "mvuq-voxel 1";

pub fn encode_checkpoint(field: &VoxelField) -> Vec<u8> {
    let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let r = field.resolution;
    let header = format!(
        "{MAGIC}\nresolution {} {} {}\nbounds_min {}\nbounds_max {}\nstep {}\nnear {}\nfar {}\nbackground {}\ndepth_weight_threshold {}\nend\n",
        r[0],
        r[1],
        r[2],
        join(&field.bounds_min),
        join(&field.bounds_max),
        field.step,
        field.near,
        field.far,
        join(&field.background),
        field.depth_weight_threshold,
    );
    let mut out = header.into_bytes();
    for v in field.density.iter().chain(&field.color) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<VoxelField> {
    let err = |m: String| Error::Format(format!("checkpoint: {m}"));
    let end = bytes
        .windows(5)
        .position(|w| w == b"\nend\n")
        .ok_or_else(|| err("missing `end` header line".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| err("header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(err(format!("expected `{MAGIC}` magic")));
    }
    let mut get = |key: &str| -> Result<Vec<f64>> {
        let line = lines.next().ok_or_else(|| err(format!("missing `{key}`")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(err(format!("expected `{key}`, found `{line}`")));
        }
        parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| err(format!("bad number `{p}` in `{key}`")))
            })
            .collect()
    };
    let arr3 = |v: Vec<f64>, key: &str| -> Result<[f64; 3]> {
        v.try_into().map_err(|_| err(format!("`{key}` needs 3 values")))
    };
    let scalar = |v: Vec<f64>, key: &str| -> Result<f64> {
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(err(format!("`{key}` needs 1 value"))),
        }
    };
    let res = arr3(get("resolution")?, "resolution")?;
    if res.iter().any(|r| r.fract() != 0.0 || *r < 0.0) {
        return Err(err("resolution must be non-negative integers".into()));
    }
    let resolution = res.map(|r| r as usize);
    let bounds_min = arr3(get("bounds_min")?, "bounds_min")?;
    let bounds_max = arr3(get("bounds_max")?, "bounds_max")?;
    let step = scalar(get("step")?, "step")?;
    let near = scalar(get("near")?, "near")?;
    let far = scalar(get("far")?, "far")?;
    let background = arr3(get("background")?, "background")?;
    let depth_weight_threshold = scalar(get("depth_weight_threshold")?, "depth_weight_threshold")?;

    let n: usize = resolution.iter().product();
    let payload = &bytes[end + 5..];
    if payload.len() != 16 * n {
        return Err(err(format!("payload has {} bytes, expected {}", payload.len(), 16 * n)));
    }
    let floats: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let field = VoxelField {
        resolution,
        bounds_min,
        bounds_max,
        density: floats[..n].to_vec(),
        color: floats[n..].to_vec(),
        step,
        near,
        far,
        background,
        depth_weight_threshold,
    };
    field.validate()?;
    Ok(field)
}

pub fn write_checkpoint(path: &Path, field: &VoxelField) -> Result<()> {
    std::fs::write(path, encode_checkpoint(field))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<VoxelField> {
    decode_checkpoint(&std::fs::read(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
