//! On-disk formats shared by every stage.
//!
//! - JSON Lines for annotations and observations (errors name the line).
//! - TUM-style trajectories: `timestamp tx ty tz qx qy qz qw` per line.
//! - `.xyz` point clouds: `x y z` per line.
//! - Feature matrices: `CLVR` binary with a JSON Lines sidecar of obs ids.
//! - Head checkpoints: `CLVH` binary of `f64` parameters.

mod binary;

pub use binary::{read_checkpoint, read_features, sidecar_path, write_checkpoint, write_features, FeatureTable};

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::curation::{Trajectory, TrajectorySample};
use crate::geometry::{Pose, Vec3};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn invalid(path: &Path, msg: impl Into<String>) -> Self {
        FormatError::Invalid { path: path.to_path_buf(), msg: msg.into() }
    }

    fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        FormatError::Parse { path: path.to_path_buf(), line, msg: msg.into() }
    }
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

/// Parse JSON Lines; blank lines are skipped, line numbers are 1-based.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| FormatError::parse(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    parse_jsonl(&read_text(path)?, path)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("serializable record"));
        s.push('\n');
    }
    s
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), FormatError> {
    write_bytes(path, to_jsonl(items).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| FormatError::parse(path, e.line(), e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

fn parse_floats<const N: usize>(line: &str, path: &Path, no: usize) -> Result<[f64; N], FormatError> {
    let mut out = [0.0f64; N];
    let mut it = line.split_whitespace();
    for (k, slot) in out.iter_mut().enumerate() {
        let tok = it.next().ok_or_else(|| FormatError::parse(path, no, format!("expected {N} numbers, found {k}")))?;
        *slot = tok.parse().map_err(|_| FormatError::parse(path, no, format!("not a number: {tok:?}")))?;
        if !slot.is_finite() {
            return Err(FormatError::parse(path, no, format!("non-finite value {tok:?}")));
        }
    }
    if it.next().is_some() {
        return Err(FormatError::parse(path, no, format!("expected {N} numbers, found more")));
    }
    Ok(out)
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parse a trajectory; quaternions are normalized after a sanity check.
pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory, FormatError> {
    let mut samples = Vec::new();
    for (no, line) in data_lines(text) {
        let [t, x, y, z, qx, qy, qz, qw] = parse_floats::<8>(line, path, no)?;
        let q = Quaternion::new(qw, qx, qy, qz);
        if (q.norm() - 1.0).abs() > 1e-3 {
            return Err(FormatError::parse(path, no, format!("quaternion norm {} is not 1", q.norm())));
        }
        samples.push(TrajectorySample {
            timestamp: t,
            pose: Pose::new(UnitQuaternion::from_quaternion(q), Vec3::new(x, y, z)),
        });
    }
    Trajectory::new(samples).map_err(|e| FormatError::invalid(path, e.to_string()))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, FormatError> {
    parse_trajectory(&read_text(path)?, path)
}

pub fn trajectory_to_string(traj: &Trajectory) -> String {
    let mut s = String::new();
    for smp in traj.samples() {
        let t = smp.pose.translation;
        let q = smp.pose.rotation.quaternion();
        s.push_str(&format!("{} {} {} {} {} {} {} {}\n", smp.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w));
    }
    s
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), FormatError> {
    write_bytes(path, trajectory_to_string(traj).as_bytes())
}

pub fn parse_cloud(text: &str, path: &Path) -> Result<Vec<Vec3>, FormatError> {
    data_lines(text).map(|(no, l)| parse_floats::<3>(l, path, no).map(|[x, y, z]| Vec3::new(x, y, z))).collect()
}

pub fn read_cloud(path: &Path) -> Result<Vec<Vec3>, FormatError> {
    parse_cloud(&read_text(path)?, path)
}

pub fn cloud_to_string(points: &[Vec3]) -> String {
    let mut s = String::with_capacity(points.len() * 48);
    for p in points {
        s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    s
}

pub fn write_cloud(path: &Path, points: &[Vec3]) -> Result<(), FormatError> {
    write_bytes(path, cloud_to_string(points).as_bytes())
}
