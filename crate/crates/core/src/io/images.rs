//! PFM (float) and binary PPM (8-bit) image files.
//!
//! PFM files are written little-endian (scale -1.0), rows bottom to top as
//! the format requires. Invalid pixels are stored as negative infinity and
//! read back as invalid. Big-endian files (positive scale) are readable.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, ImageBuffer};

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Split off `count` whitespace-separated header tokens; returns them and the
/// offset of the payload (one whitespace byte after the last token).
fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(format_err("truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(format_err("header not terminated"));
    }
    Ok((tokens, i + 1))
}

fn parse_dim(s: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format_err(format!("bad dimension `{s}`"))),
    }
}

/// Decoded PFM: `channels` interleaved floats per pixel, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Pfm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Pfm {
    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "PF" } else { "Pf" };
        let mut out = format!("{magic}\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        let row = self.width * self.channels;
        for y in (0..self.height).rev() {
            for v in &self.data[y * row..(y + 1) * row] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let channels = match bytes.get(..2) {
            Some(b"Pf") => 1,
            Some(b"PF") => 3,
            _ => return Err(format_err("not a PFM file (expected `Pf` or `PF` magic)")),
        };
        let (tok, offset) = header_tokens(&bytes[2..], 3)?;
        let width = parse_dim(&tok[0])?;
        let height = parse_dim(&tok[1])?;
        let scale: f64 = tok[2]
            .parse()
            .map_err(|_| format_err(format!("bad PFM scale `{}`", tok[2])))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(format_err("PFM scale must be non-zero"));
        }
        let payload = &bytes[2 + offset..];
        let row = width * channels;
        let need = row * height * 4;
        if payload.len() < need {
            return Err(format_err(format!(
                "truncated PFM payload: {} of {need} bytes",
                payload.len()
            )));
        }
        let mut data = vec![0f32; row * height];
        for (k, chunk) in payload[..need].chunks_exact(4).enumerate() {
            let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if scale < 0.0 {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
            let file_row = k / row;
            let y = height - 1 - file_row;
            data[y * row + k % row] = v;
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }
}

/// Single-channel map (depth, uncertainty, error) to PFM.
pub fn encode_scalar_pfm(map: &DepthMap) -> Vec<u8> {
    Pfm {
        width: map.width,
        height: map.height,
        channels: 1,
        data: map
            .values
            .iter()
            .zip(&map.valid)
            .map(|(&v, &ok)| if ok { v as f32 } else { f32::NEG_INFINITY })
            .collect(),
    }
    .encode()
}

pub fn decode_scalar_pfm(bytes: &[u8]) -> Result<DepthMap> {
    let p = Pfm::decode(bytes)?;
    if p.channels != 1 {
        return Err(format_err("expected a single-channel PFM (`Pf`)"));
    }
    let valid: Vec<bool> = p.data.iter().map(|&v| v != f32::NEG_INFINITY).collect();
    Ok(DepthMap {
        width: p.width,
        height: p.height,
        values: p
            .data
            .iter()
            .zip(&valid)
            .map(|(&v, &ok)| if ok { v as f64 } else { 0.0 })
            .collect(),
        valid,
    })
}

pub fn write_pfm(path: &Path, map: &DepthMap) -> Result<()> {
    std::fs::write(path, encode_scalar_pfm(map))?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    decode_scalar_pfm(&std::fs::read(path)?).map_err(|e| format_err(format!("{}: {e}", path.display())))
}

/// Binary 8-bit PPM; values are clamped to [0, 1] and rounded.
pub fn encode_ppm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for px in &img.values {
        for c in px {
            out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.get(..2) != Some(b"P6") {
        return Err(format_err("not a binary PPM file (expected `P6` magic)"));
    }
    let (tok, offset) = header_tokens(&bytes[2..], 3)?;
    let width = parse_dim(&tok[0])?;
    let height = parse_dim(&tok[1])?;
    if tok[2] != "255" {
        return Err(format_err(format!("unsupported PPM max value `{}`", tok[2])));
    }
    let payload = &bytes[2 + offset..];
    let need = width * height * 3;
    if payload.len() < need {
        return Err(format_err(format!(
            "truncated PPM payload: {} of {need} bytes",
            payload.len()
        )));
    }
    let values = payload[..need]
        .chunks_exact(3)
        .map(|c| [c[0] as f64 / 255.0, c[1] as f64 / 255.0, c[2] as f64 / 255.0])
        .collect();
    Ok(ImageBuffer {
        width,
        height,
        values,
        valid: vec![true; width * height],
    })
}

pub fn write_ppm(path: &Path, img: &ImageBuffer) -> Result<()> {
    std::fs::write(path, encode_ppm(img))?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<ImageBuffer> {
    decode_ppm(&std::fs::read(path)?).map_err(|e| format_err(format!("{}: {e}", path.display())))
}
