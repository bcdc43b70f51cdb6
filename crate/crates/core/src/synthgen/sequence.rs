use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::world::loop_point;
use super::SynthError;
use crate::curation::{FrameAnnotation, GlobalInstance, Trajectory, TrajectorySample, Weather};
use crate::geometry::{in_fov, inscribe_ellipsoid, Box3D, CameraIntrinsics, Pose, Vec3};

/// One traversal of the loop road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub sequence_id: String,
    pub weather: Weather,
    pub loop_half: [f64; 2],
    pub n_frames: usize,
    pub frame_dt: f64,
    /// Starting point as a fraction of the loop perimeter.
    pub start: f64,
    /// Offset to the left of the road center line (m).
    pub lateral_offset: f64,
    /// Drive the loop clockwise.
    pub reverse: bool,
    pub sensor_height: f64,
    /// Boxes are annotated only when their center is within this range of the camera.
    pub annotation_range: f64,
    /// Std-dev of the ground-plane jitter added to annotated box centers (m).
    pub box_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudSpec {
    pub points_per_instance: usize,
    pub lidar_range: f64,
    pub clutter_points: usize,
    pub clutter_radius: f64,
    pub dropout: f64,
}

impl Default for CloudSpec {
    fn default() -> Self {
        Self { points_per_instance: 40, lidar_range: 60.0, clutter_points: 200, clutter_radius: 40.0, dropout: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    /// Points in the sensor frame.
    pub cloud: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSequence {
    pub sequence_id: String,
    pub weather: Weather,
    pub trajectory: Trajectory,
    pub annotations: Vec<FrameAnnotation>,
    /// World index of the instance behind each annotation.
    pub sources: Vec<usize>,
    pub frames: Vec<SynthFrame>,
}

/// Camera mounted at the sensor origin looking along sensor +x, with the
/// optical convention x right, y down, z forward.
pub fn optical_rig() -> Pose {
    #[rustfmt::skip]
    let m = Matrix3::new(
        0.0, 0.0, 1.0,
        -1.0, 0.0, 0.0,
        0.0, -1.0, 0.0,
    );
    Pose::new(UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m)), Vec3::zeros())
}

pub fn camera_pose(sensor_pose: &Pose, rig: &Pose) -> Pose {
    sensor_pose.compose(rig)
}

/// Boxes of the instances visible from `cam_pose`, in the sensor frame.
pub(crate) fn visible_boxes(
    world: &[GlobalInstance],
    sensor_pose: &Pose,
    cam_pose: &Pose,
    cam: &CameraIntrinsics,
    range: f64,
) -> Vec<(usize, Box3D)> {
    let to_sensor = sensor_pose.inverse();
    world
        .iter()
        .enumerate()
        .filter(|(_, inst)| {
            (inst.bbox.center - cam_pose.translation).norm() <= range && in_fov(&inst.bbox.center, cam, cam_pose, 0.0)
        })
        .map(|(k, inst)| (k, inst.bbox.transformed(&to_sensor)))
        .collect()
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn gen_cloud(world: &[GlobalInstance], sensor_pose: &Pose, spec: &CloudSpec, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let to_sensor = sensor_pose.inverse();
    let origin = sensor_pose.translation;
    let mut pts = Vec::new();
    for inst in world {
        let e = inscribe_ellipsoid(&inst.bbox).expect("world boxes are valid");
        let in_range = (inst.bbox.center - origin).norm() <= spec.lidar_range;
        for _ in 0..spec.points_per_instance {
            // draw even when out of range so the stream does not depend on visibility
            let u = unit_vector(rng);
            let keep = !rng.random_bool(spec.dropout);
            if in_range && keep {
                pts.push(to_sensor.transform_point(&e.surface_point(&u)));
            }
        }
    }
    for _ in 0..spec.clutter_points {
        let r = spec.clutter_radius * rng.random::<f64>().sqrt();
        let th = rng.random_range(0.0..std::f64::consts::TAU);
        let z = rng.random_range(0.0..0.2);
        let p = Vec3::new(origin.x + r * th.cos(), origin.y + r * th.sin(), z);
        pts.push(to_sensor.transform_point(&p));
    }
    pts
}

/// Drive one traversal. Annotation boxes are the world boxes moved into the
/// sensor frame, so mapping them back through the trajectory recovers the
/// world (up to `box_noise`).
pub fn gen_sequence(
    world: &[GlobalInstance],
    path: &PathSpec,
    rig: &Pose,
    cam: &CameraIntrinsics,
    cloud: &CloudSpec,
    rng: &mut ChaCha8Rng,
) -> Result<SynthSequence, SynthError> {
    if path.n_frames == 0 || !(path.frame_dt > 0.0) {
        return Err(SynthError::Config("a sequence needs at least one frame and a positive frame_dt".into()));
    }
    if !(0.0..=1.0).contains(&cloud.dropout) {
        return Err(SynthError::Config("cloud dropout must be in [0, 1]".into()));
    }
    let noise = Normal::new(0.0, path.box_noise.max(0.0)).map_err(|e| SynthError::Config(e.to_string()))?;
    let perim = 4.0 * (path.loop_half[0] + path.loop_half[1]);
    let step = perim / path.n_frames as f64;
    let mut samples = Vec::with_capacity(path.n_frames);
    let mut annotations = Vec::new();
    let mut sources = Vec::new();
    let mut frames = Vec::with_capacity(path.n_frames);
    for i in 0..path.n_frames {
        let dir = if path.reverse { -1.0 } else { 1.0 };
        let s = path.start * perim + dir * i as f64 * step;
        let (p, heading) = loop_point(path.loop_half, s);
        let heading = heading * dir;
        let left = Vec3::new(-heading.y, heading.x, 0.0);
        let pos = p + left * path.lateral_offset + Vec3::new(0.0, 0.0, path.sensor_height);
        let sensor_pose = Pose::from_yaw(heading.y.atan2(heading.x), pos);
        let timestamp = i as f64 * path.frame_dt;
        samples.push(TrajectorySample { timestamp, pose: sensor_pose });

        let cam_pose = camera_pose(&sensor_pose, rig);
        for (k, mut bx) in visible_boxes(world, &sensor_pose, &cam_pose, cam, path.annotation_range) {
            if path.box_noise > 0.0 {
                bx.center.x += noise.sample(rng);
                bx.center.y += noise.sample(rng);
            }
            sources.push(k);
            annotations.push(FrameAnnotation {
                sequence_id: path.sequence_id.clone(),
                frame_id: i as u64,
                timestamp,
                class_name: world[k].class_name.clone(),
                bbox: bx,
            });
        }
        frames.push(SynthFrame { frame_id: i as u64, timestamp, cloud: gen_cloud(world, &sensor_pose, cloud, rng) });
    }
    let trajectory = Trajectory::new(samples).map_err(|e| SynthError::Config(e.to_string()))?;
    Ok(SynthSequence {
        sequence_id: path.sequence_id.clone(),
        weather: path.weather,
        trajectory,
        annotations,
        sources,
        frames,
    })
}
