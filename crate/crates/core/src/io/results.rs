//! Tabular outputs and the result bundle.
//!
//! CSV files start with a `# schema=1` comment line, then a header row.
//! Column sets are fixed per file kind:
//!
//! | file | columns |
//! |------|---------|
//! | scores | `view_id,score,covered_fraction` |
//! | rounds | `round,selected_view,selected_score,candidates,fit_loss,<metrics...>` |
//! | poses | `view_id,r00..r22,tx,ty,tz` (camera-to-world) |
//! | curve | `fraction,uncertainty,oracle` (normalized remaining MAE) |
//! | metrics | `view_id,<metric>,...` |
//!
//! Metric columns absent from a run are omitted rather than zero-filled.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::active::RoundRecord;
use crate::error::Result;
use crate::geometry::Pose;
use crate::metrics::AuseReport;
use crate::uncertainty::ViewScore;

pub const CSV_SCHEMA: &str = "# schema=1\n";

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut buf = CSV_SCHEMA.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

fn num(x: f64) -> String {
    // Shortest representation that round-trips.
    format!("{x:?}")
}

pub fn scores_csv(scores: &[ViewScore]) -> Result<Vec<u8>> {
    let header = ["view_id", "score", "covered_fraction"].map(String::from);
    let rows: Vec<Vec<String>> = scores
        .iter()
        .map(|s| vec![s.view_id.clone(), num(s.score), num(s.covered_fraction)])
        .collect();
    csv_bytes(&header, &rows)
}

/// Metric columns present in any record, in `keep` order (or sorted when
/// `keep` is empty).
fn metric_columns(maps: &[&BTreeMap<String, f64>], keep: &[String]) -> Vec<String> {
    let mut present: Vec<String> = maps.iter().flat_map(|m| m.keys().cloned()).collect();
    present.sort();
    present.dedup();
    if keep.is_empty() {
        present
    } else {
        keep.iter().filter(|k| present.contains(k)).cloned().collect()
    }
}

pub fn rounds_csv(records: &[RoundRecord], keep: &[String]) -> Result<Vec<u8>> {
    let cols = metric_columns(&records.iter().map(|r| &r.metrics_after_fit).collect::<Vec<_>>(), keep);
    let mut header: Vec<String> = ["round", "selected_view", "selected_score", "candidates", "fit_loss"]
        .map(String::from)
        .to_vec();
    header.extend(cols.iter().cloned());
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let sel = r
                .scores
                .iter()
                .find(|s| s.view_id == r.selected_view)
                .map_or(String::new(), |s| num(s.score));
            let mut row = vec![
                r.round.to_string(),
                r.selected_view.clone(),
                sel,
                r.scores.len().to_string(),
                r.final_fit_loss.map_or(String::new(), num),
            ];
            row.extend(
                cols.iter()
                    .map(|c| r.metrics_after_fit.get(c).map_or(String::new(), |v| num(*v))),
            );
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

/// One JSON object per round, newline-terminated. Metrics not in `keep`
/// are dropped when `keep` is non-empty.
pub fn rounds_jsonl(records: &[RoundRecord], keep: &[String]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        let mut r = r.clone();
        if !keep.is_empty() {
            r.metrics_after_fit.retain(|k, _| keep.contains(k));
        }
        serde_json::to_writer(&mut out, &r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn poses_csv(poses: &[(String, Pose)]) -> Result<Vec<u8>> {
    let mut header = vec!["view_id".to_string()];
    for i in 0..3 {
        for j in 0..3 {
            header.push(format!("r{i}{j}"));
        }
    }
    header.extend(["tx", "ty", "tz"].map(String::from));
    let rows: Vec<Vec<String>> = poses
        .iter()
        .map(|(id, p)| {
            let mut row = vec![id.clone()];
            for i in 0..3 {
                for j in 0..3 {
                    row.push(num(p.rotation[(i, j)]));
                }
            }
            row.extend(p.translation.iter().map(|v| num(*v)));
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

pub fn curve_csv(report: &AuseReport) -> Result<Vec<u8>> {
    let header = ["fraction", "uncertainty", "oracle"].map(String::from);
    let u = report.curve.normalized();
    let o = report.oracle.normalized();
    let rows: Vec<Vec<String>> = report
        .curve
        .fractions
        .iter()
        .zip(u.iter().zip(&o))
        .map(|(f, (a, b))| vec![num(*f), num(*a), num(*b)])
        .collect();
    csv_bytes(&header, &rows)
}

pub fn metrics_csv(rows: &[(String, BTreeMap<String, f64>)]) -> Result<Vec<u8>> {
    let cols = metric_columns(&rows.iter().map(|(_, m)| m).collect::<Vec<_>>(), &[]);
    let mut header = vec!["view_id".to_string()];
    header.extend(cols.iter().cloned());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(id, m)| {
            let mut r = vec![id.clone()];
            r.extend(cols.iter().map(|c| m.get(c).map_or(String::new(), |v| num(*v))));
            r
        })
        .collect();
    csv_bytes(&header, &body)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Version string in `git describe` style: `v<crate version>`, with the
/// build-time `MVUQ_GIT_DESCRIBE` appended when set.
pub fn version_string() -> String {
    match option_env!("MVUQ_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => format!("v{}-{d}", env!("CARGO_PKG_VERSION")),
        _ => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub version: String,
    pub config_hash: Option<String>,
    pub seed: u64,
    pub started_unix_s: f64,
    pub wall_time_s: f64,
    pub files: Vec<FileEntry>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
}

/// Files written under one output directory, tracked for the summary.
#[derive(Debug)]
pub struct ResultBundle {
    root: PathBuf,
    files: Vec<FileEntry>,
    started: Instant,
    started_unix_s: f64,
}

impl ResultBundle {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        let started_unix_s = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
            started_unix_s,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Write `bytes` to `rel` (relative to the bundle root) and record it.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Write `summary.json` listing every file written so far.
    pub fn finish(
        self,
        command: &str,
        config_hash: Option<String>,
        seed: u64,
        values: BTreeMap<String, f64>,
    ) -> Result<Summary> {
        let summary = Summary {
            command: command.to_string(),
            version: version_string(),
            config_hash,
            seed,
            started_unix_s: self.started_unix_s,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            files: self.files,
            values,
        };
        let mut text = serde_json::to_vec_pretty(&summary)?;
        text.push(b'\n');
        std::fs::write(self.root.join("summary.json"), text)?;
        Ok(summary)
    }
}

/// Check that every file listed in a summary exists with the recorded hash.
pub fn verify_summary(root: &Path) -> Result<Vec<FileEntry>> {
    let text = std::fs::read(root.join("summary.json"))?;
    let v: serde_json::Value = serde_json::from_slice(&text)?;
    let files = v["files"]
        .as_array()
        .ok_or_else(|| crate::Error::Format("summary.json: missing `files`".into()))?;
    let mut out = Vec::new();
    for f in files {
        let rel = f["path"].as_str().unwrap_or_default();
        let want = f["sha256"].as_str().unwrap_or_default();
        let bytes = std::fs::read(root.join(rel))?;
        let got = sha256_hex(&bytes);
        if got != want {
            return Err(crate::Error::Format(format!("{rel}: checksum mismatch")));
        }
        out.push(FileEntry {
            path: rel.to_string(),
            sha256: got,
            bytes: bytes.len() as u64,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_csv_layout() {
        let s = [ViewScore {
            view_id: "c001".into(),
            score: 0.5,
            covered_fraction: 1.0,
        }];
        let text = String::from_utf8(scores_csv(&s).unwrap()).unwrap();
        assert_eq!(text, "# schema=1\nview_id,score,covered_fraction\nc001,0.5,1.0\n");
    }

    #[test]
    fn bundle_summary_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = ResultBundle::create(dir.path()).unwrap();
        b.write("a.csv", b"x\n").unwrap();
        b.write("sub/b.txt", b"yz").unwrap();
        let s = b.finish("test", None, 7, BTreeMap::new()).unwrap();
        assert_eq!(s.files.len(), 2);
        let checked = verify_summary(dir.path()).unwrap();
        assert_eq!(checked, s.files);
        std::fs::write(dir.path().join("a.csv"), b"tampered").unwrap();
        assert!(verify_summary(dir.path()).is_err());
    }
}
