//! On-disk layout of a dataset directory, as written by `synth` and read by
//! `curate`:
//!
//! ```text
//! camera.json                 intrinsics + sensor_to_camera pose
//! sequences.json              [{sequence_id, weather, dir}]
//! <dir>/trajectory.txt        sensor poses, TUM convention
//! <dir>/annotations.jsonl     sensor-frame boxes
//! <dir>/frames.jsonl          [{frame_id, timestamp}]
//! <dir>/clouds/<frame>.xyz    sensor-frame points
//! ```

use std::path::{Path, PathBuf};

use objreid_core::curation::Weather;
use objreid_core::geometry::{CameraIntrinsics, Pose};
use serde::{Deserialize, Serialize};

pub const CAMERA: &str = "camera.json";
pub const SEQUENCES: &str = "sequences.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-sensor transform.
    pub sensor_to_camera: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub sequence_id: String,
    pub weather: Weather,
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub frame_id: u64,
    pub timestamp: f64,
}

pub fn trajectory(dir: &str) -> String {
    format!("{dir}/trajectory.txt")
}

pub fn annotations(dir: &str) -> String {
    format!("{dir}/annotations.jsonl")
}

pub fn frames(dir: &str) -> String {
    format!("{dir}/frames.jsonl")
}

pub fn cloud(dir: &str, frame_id: u64) -> String {
    format!("{dir}/clouds/{frame_id:06}.xyz")
}

/// Image of a frame under an image root: `<root>/<sequence_id>/<frame_id>.png`.
pub fn frame_image(root: &Path, sequence_id: &str, frame_id: u64) -> PathBuf {
    root.join(sequence_id).join(format!("{frame_id:06}.png"))
}

pub fn frame_mask(root: &Path, sequence_id: &str, frame_id: u64) -> PathBuf {
    frame_image(root, sequence_id, frame_id)
}
