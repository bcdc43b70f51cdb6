use serde::{Deserialize, Serialize};

use super::{GlobalInstance, ObservationRecord, Weather};
use crate::geometry::{
    conic_to_bbox, in_fov, inscribe_ellipsoid, points_in_box, project_quadric, CameraIntrinsics, Pose, Vec3,
};
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationParams {
    /// Instances farther than this from the camera are ignored (meters).
    pub range_m: f64,
    /// Minimum cloud points inside the instance box at the frame timestamp.
    pub min_points: usize,
    /// Field-of-view slack in pixels for the instance-center test.
    pub fov_margin_px: f64,
}

impl Default for ObservationParams {
    fn default() -> Self {
        Self { range_m: 50.0, min_points: 5, fov_margin_px: 0.0 }
    }
}

/// One camera frame: pose, condition and the world-frame point cloud captured
/// at the same timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    pub sequence_id: String,
    pub frame_id: u64,
    pub timestamp: f64,
    pub weather: Weather,
    pub cam_pose: Pose,
    pub cloud: Vec<Vec3>,
}

struct Candidate {
    instance: usize,
    bbox: crate::geometry::BBox2D,
}

fn frame_candidates(
    instances: &[GlobalInstance],
    frame: &FrameInput,
    cam: &CameraIntrinsics,
    params: &ObservationParams,
) -> Vec<Candidate> {
    let cam_center = frame.cam_pose.translation;
    let mut out = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let center = inst.bbox.center;
        if (center - cam_center).norm() > params.range_m {
            continue;
        }
        if !in_fov(&center, cam, &frame.cam_pose, params.fov_margin_px) {
            continue;
        }
        if points_in_box(&frame.cloud, &inst.bbox) < params.min_points {
            continue;
        }
        let projected = inscribe_ellipsoid(&inst.bbox)
            .map(|e| e.dual_quadric())
            .and_then(|q| project_quadric(&q, cam, &frame.cam_pose))
            .and_then(|c| conic_to_bbox(&c));
        match projected {
            Ok(bb) => match bb.clip(cam.width(), cam.height()) {
                Some(clipped) => out.push(Candidate { instance: k, bbox: clipped }),
                None => log::debug!(
                    "instance {} projects outside frame {}/{}",
                    inst.instance_id,
                    frame.sequence_id,
                    frame.frame_id
                ),
            },
            Err(e) => log::warn!(
                "skipping instance {} in frame {}/{}: {e}",
                inst.instance_id,
                frame.sequence_id,
                frame.frame_id
            ),
        }
    }
    out
}

/// Emit one record per (frame, instance) that survives the range, field of
/// view and point-cloud filters. Observation ids are assigned consecutively
/// from `first_obs_id` in frame order, then instance order.
pub fn generate_observations(
    instances: &[GlobalInstance],
    frames: &[FrameInput],
    cam: &CameraIntrinsics,
    params: &ObservationParams,
    first_obs_id: u64,
) -> Vec<ObservationRecord> {
    generate_observations_with(Exec::default(), instances, frames, cam, params, first_obs_id)
}

pub fn generate_observations_with(
    exec: Exec,
    instances: &[GlobalInstance],
    frames: &[FrameInput],
    cam: &CameraIntrinsics,
    params: &ObservationParams,
    first_obs_id: u64,
) -> Vec<ObservationRecord> {
    let per_frame = par::map(exec, frames, |f| frame_candidates(instances, f, cam, params));
    let mut next = first_obs_id;
    let mut out = Vec::new();
    for (frame, cands) in frames.iter().zip(per_frame) {
        for c in cands {
            let inst = &instances[c.instance];
            out.push(ObservationRecord {
                obs_id: next,
                instance_id: inst.instance_id,
                class_name: inst.class_name.clone(),
                sequence_id: frame.sequence_id.clone(),
                frame_id: frame.frame_id,
                weather: frame.weather,
                bbox2d: c.bbox,
                cam_pose: frame.cam_pose,
                object_center: inst.bbox.center,
            });
            next += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BBox2D, Box3D};
    use rand::Rng;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(300.0, 300.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn inst(id: u64, c: Vec3) -> GlobalInstance {
        GlobalInstance {
            instance_id: id,
            class_name: "pole".into(),
            bbox: Box3D::new(c, Vec3::new(0.5, 0.5, 2.0), 0.0).unwrap(),
            support_count: 3,
        }
    }

    fn frame(cloud: Vec<Vec3>) -> FrameInput {
        FrameInput {
            sequence_id: "s0".into(),
            frame_id: 7,
            timestamp: 0.0,
            weather: Weather::Sunny,
            cam_pose: Pose::identity(),
            cloud,
        }
    }

    fn dense_cloud_around(c: Vec3) -> Vec<Vec3> {
        (0..10).map(|i| c + Vec3::new(0.0, 0.0, 0.05 * i as f64)).collect()
    }

    #[test]
    fn out_of_range_excluded() {
        let c = Vec3::new(0.0, 0.0, 100.0);
        let obs = generate_observations(
            &[inst(0, c)],
            &[frame(dense_cloud_around(c))],
            &cam(),
            &ObservationParams { range_m: 50.0, ..Default::default() },
            0,
        );
        assert!(obs.is_empty());
    }

    #[test]
    fn no_cloud_points_excluded() {
        let c = Vec3::new(0.0, 0.0, 10.0);
        let p = ObservationParams { min_points: 5, ..Default::default() };
        assert!(generate_observations(&[inst(0, c)], &[frame(vec![])], &cam(), &p, 0).is_empty());
        let obs = generate_observations(&[inst(0, c)], &[frame(dense_cloud_around(c))], &cam(), &p, 10);
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].obs_id, 10);
        assert_eq!(obs[0].frame_id, 7);
        let bb = obs[0].bbox2d;
        assert!(bb.x_min < 320.0 && bb.x_max > 320.0 && bb.y_min >= 0.0 && bb.y_max <= 480.0);
    }

    #[test]
    fn behind_camera_not_observed() {
        let c = Vec3::new(0.0, 0.0, -10.0);
        assert!(generate_observations(
            &[inst(0, c)],
            &[frame(dense_cloud_around(c))],
            &cam(),
            &ObservationParams::default(),
            0
        )
        .is_empty());
    }

    #[test]
    fn camera_inside_box_is_skipped_not_fatal() {
        // center in front but the camera sits inside the ellipsoid
        let big = GlobalInstance {
            bbox: Box3D::new(Vec3::new(0.0, 0.0, 0.5), Vec3::new(4.0, 4.0, 4.0), 0.0).unwrap(),
            ..inst(0, Vec3::zeros())
        };
        let cloud = dense_cloud_around(Vec3::new(0.0, 0.0, 0.5));
        let obs = generate_observations(
            &[big, inst(1, Vec3::new(0.0, 0.0, 10.0))],
            &[frame(cloud.into_iter().chain(dense_cloud_around(Vec3::new(0.0, 0.0, 10.0))).collect())],
            &cam(),
            &ObservationParams::default(),
            0,
        );
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].instance_id, 1);
    }

    /// Direct per-instance, per-frame re-filter.
    fn brute_force(
        instances: &[GlobalInstance],
        frames: &[FrameInput],
        cam: &CameraIntrinsics,
        p: &ObservationParams,
    ) -> Vec<(u64, u64, BBox2D)> {
        let mut out = Vec::new();
        for f in frames {
            let ext = f.cam_pose.inverse();
            for inst in instances {
                let c = inst.bbox.center;
                let in_range = (c - f.cam_pose.translation).norm() <= p.range_m;
                let pc = ext.transform_point(&c);
                let (u, v) = (cam.fx() * pc.x / pc.z + cam.cx(), cam.fy() * pc.y / pc.z + cam.cy());
                let visible = pc.z > 0.0 && (0.0..=640.0).contains(&u) && (0.0..=480.0).contains(&v);
                let yaw_inv = Pose::from_yaw(inst.bbox.yaw, c).inverse();
                let support = f
                    .cloud
                    .iter()
                    .filter(|q| {
                        let l = yaw_inv.transform_point(q);
                        (0..3).all(|i| l[i].abs() <= inst.bbox.dims[i] / 2.0)
                    })
                    .count();
                if in_range && visible && support >= p.min_points {
                    let e = inscribe_ellipsoid(&inst.bbox).unwrap();
                    let bb = conic_to_bbox(&project_quadric(&e.dual_quadric(), cam, &f.cam_pose).unwrap()).unwrap();
                    out.push((inst.instance_id, f.frame_id, bb.clip(640, 480).unwrap()));
                }
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_filter() {
        let mut rng = crate::seed::rng(8);
        let instances: Vec<GlobalInstance> = (0..30)
            .map(|i| {
                inst(
                    i,
                    Vec3::new(
                        rng.random_range(-40.0..40.0),
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-40.0..40.0),
                    ),
                )
            })
            .collect();
        let frames: Vec<FrameInput> = (0..20)
            .map(|k| {
                let mut cloud: Vec<Vec3> = Vec::new();
                for i in &instances {
                    if rng.random_bool(0.7) {
                        let n = rng.random_range(0..9);
                        cloud.extend((0..n).map(|j| i.bbox.center + Vec3::new(0.0, 0.0, 0.1 * j as f64)));
                    }
                }
                FrameInput {
                    sequence_id: "s".into(),
                    frame_id: k,
                    timestamp: k as f64,
                    weather: Weather::Dark,
                    cam_pose: Pose::from_yaw(
                        rng.random_range(-0.3..0.3),
                        Vec3::new(rng.random_range(-5.0..5.0), 0.0, rng.random_range(-5.0..5.0)),
                    ),
                    cloud,
                }
            })
            .collect();
        let p = ObservationParams { range_m: 30.0, min_points: 4, fov_margin_px: 0.0 };
        let got: Vec<(u64, u64, BBox2D)> = generate_observations(&instances, &frames, &cam(), &p, 0)
            .into_iter()
            .map(|o| (o.instance_id, o.frame_id, o.bbox2d))
            .collect();
        let want = brute_force(&instances, &frames, &cam(), &p);
        assert!(!want.is_empty());
        assert_eq!(got, want);
    }

    #[test]
    fn monotone_in_params() {
        let mut rng = crate::seed::rng(12);
        let instances: Vec<GlobalInstance> = (0..40)
            .map(|i| inst(i, Vec3::new(rng.random_range(-30.0..30.0), 0.0, rng.random_range(1.0..60.0))))
            .collect();
        let cloud: Vec<Vec3> = instances
            .iter()
            .flat_map(|i| {
                (0..rng.random_range(0..12)).map(move |j| i.bbox.center + Vec3::new(0.0, 0.0, 0.08 * j as f64))
            })
            .collect();
        let frames = vec![frame(cloud)];
        let count = |range_m, min_points| {
            generate_observations(
                &instances,
                &frames,
                &cam(),
                &ObservationParams { range_m, min_points, fov_margin_px: 0.0 },
                0,
            )
            .len()
        };
        for m in 0..12 {
            assert!(count(50.0, m + 1) <= count(50.0, m));
        }
        for r in 1..12 {
            assert!(count(5.0 * r as f64, 3) <= count(5.0 * (r + 1) as f64, 3));
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let instances: Vec<GlobalInstance> =
            (0..10).map(|i| inst(i, Vec3::new(i as f64 - 5.0, 0.0, 10.0 + i as f64))).collect();
        let cloud: Vec<Vec3> = instances.iter().flat_map(|i| dense_cloud_around(i.bbox.center)).collect();
        let frames: Vec<FrameInput> = (0..8).map(|k| FrameInput { frame_id: k, ..frame(cloud.clone()) }).collect();
        let a =
            generate_observations_with(Exec::Sequential, &instances, &frames, &cam(), &ObservationParams::default(), 0);
        let b =
            generate_observations_with(Exec::Parallel, &instances, &frames, &cam(), &ObservationParams::default(), 0);
        assert_eq!(a, b);
    }
}
