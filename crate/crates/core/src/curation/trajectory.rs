use serde::{Deserialize, Serialize};

use super::{CurationError, FrameAnnotation};
use crate::geometry::{Box3D, Pose};

/// Sensor pose in the global frame at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub timestamp: f64,
    pub pose: Pose,
}

/// Time-ordered poses with interpolation; extrapolation is refused.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self, CurationError> {
        if samples.is_empty() {
            return Err(CurationError::EmptyTrajectory);
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].timestamp > w[0].timestamp) {
                return Err(CurationError::NonMonotonicTrajectory { index: i + 1 });
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].timestamp, self.samples[self.samples.len() - 1].timestamp)
    }

    /// Pose at `t`: linear in translation, slerp in rotation between the
    /// bracketing samples.
    pub fn pose_at(&self, t: f64) -> Result<Pose, CurationError> {
        let (start, end) = self.span();
        if !(t >= start && t <= end) {
            return Err(CurationError::OutOfRange { t, start, end });
        }
        let idx = self.samples.partition_point(|s| s.timestamp <= t);
        let hi = idx.min(self.samples.len() - 1);
        let lo = idx.saturating_sub(1);
        let (a, b) = (&self.samples[lo], &self.samples[hi]);
        if lo == hi || a.timestamp == t {
            return Ok(a.pose);
        }
        let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
        Ok(a.pose.interpolate(&b.pose, s))
    }
}

/// An annotation box moved into the global frame, with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBox {
    pub bbox: Box3D,
    pub class_name: String,
    pub sequence_id: String,
    pub frame_id: u64,
    pub timestamp: f64,
}

/// Transform each annotation by the trajectory pose interpolated at its
/// timestamp.
pub fn to_global(annotations: &[FrameAnnotation], trajectory: &Trajectory) -> Result<Vec<GlobalBox>, CurationError> {
    annotations
        .iter()
        .map(|a| {
            a.bbox.validate()?;
            let pose = trajectory.pose_at(a.timestamp)?;
            Ok(GlobalBox {
                bbox: a.bbox.transformed(&pose),
                class_name: a.class_name.clone(),
                sequence_id: a.sequence_id.clone(),
                frame_id: a.frame_id,
                timestamp: a.timestamp,
            })
        })
        .collect()
}
