//! From per-frame 3D annotations and aligned trajectories to globally unique
//! instances and per-image observation records.
//!
//! The pipeline is `to_global` → `cluster_instances` → `fit_instance_box` →
//! `generate_observations`, with `refine_bbox_to_mask` as an optional last
//! step when segmentation masks are available.

mod dbscan;
mod fit;
mod observe;
mod refine;
mod trajectory;

pub use dbscan::{cluster_instances, dbscan, Cluster, DbscanParams};
pub use fit::{circular_median, fit_instance_box, median};
pub use observe::{generate_observations, generate_observations_with, FrameInput, ObservationParams};
pub use refine::refine_bbox_to_mask;
pub use trajectory::{to_global, GlobalBox, Trajectory, TrajectorySample};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{vec3_serde, BBox2D, Box3D, GeometryError, Pose, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurationError {
    #[error("timestamp {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("trajectory timestamps must be strictly increasing (sample {index})")]
    NonMonotonicTrajectory { index: usize },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("cannot fit a box to an empty cluster")]
    EmptyCluster,
    #[error("invalid clustering parameters: {0}")]
    InvalidParams(String),
    #[error("mask has no foreground pixels inside the box")]
    EmptyMask,
    #[error("mask is {mask_w}x{mask_h}, expected {want_w}x{want_h}")]
    MaskShape { mask_w: u32, mask_h: u32, want_w: u32, want_h: u32 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Scene condition of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Sunny,
    Cloudy,
    Dark,
    Rainy,
}

impl Weather {
    pub const ALL: [Weather; 4] = [Weather::Sunny, Weather::Cloudy, Weather::Dark, Weather::Rainy];

    pub fn as_str(&self) -> &'static str {
        match self {
            Weather::Sunny => "sunny",
            Weather::Cloudy => "cloudy",
            Weather::Dark => "dark",
            Weather::Rainy => "rainy",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weather {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Weather::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| format!("unknown weather `{s}` (expected sunny, cloudy, dark or rainy)"))
    }
}

/// One 3D box annotation in the sensor frame of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameAnnotation {
    pub sequence_id: String,
    pub frame_id: u64,
    pub timestamp: f64,
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "box")]
    pub bbox: Box3D,
}

/// A curated object instance in the global frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalInstance {
    pub instance_id: u64,
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(rename = "box")]
    pub bbox: Box3D,
    pub support_count: usize,
}

/// One sighting of one instance in one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub obs_id: u64,
    pub instance_id: u64,
    #[serde(rename = "class")]
    pub class_name: String,
    pub sequence_id: String,
    pub frame_id: u64,
    pub weather: Weather,
    pub bbox2d: BBox2D,
    pub cam_pose: Pose,
    #[serde(with = "vec3_serde")]
    pub object_center: Vec3,
}
