//! SE(3) poses, the pinhole camera and the ellipsoid projection chain
//! `Box3D -> Ellipsoid -> DualQuadric -> DualConic -> BBox2D`.
//!
//! Frame conventions:
//! - A [`Pose`] maps points from its local frame into its parent frame,
//!   `p_parent = R * p_local + t`.
//! - Camera poses are camera-to-world; the camera frame is the optical frame
//!   (x right, y down, z forward). Extrinsics used for projection are the
//!   inverse of the camera pose.
//! - Boxes are upright: yaw is a rotation about the z axis of the frame the
//!   box is expressed in.

mod camera;
mod pose;
mod quadric;

pub use camera::{in_fov, points_in_box, viewpoint_delta, CameraIntrinsics};
pub use pose::{normalize_angle, Pose};
pub use quadric::{
    conic_to_bbox, inscribe_ellipsoid, project_quadric, BBox2D, Box3D, DualConic, DualQuadric, Ellipsoid,
};

use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("ellipsoid center is at or behind the image plane (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("degenerate conic: {0}")]
    DegenerateConic(String),
}

/// Serde helper: a 3-vector as `[x, y, z]`.
pub(crate) mod vec3_serde {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(a[0], a[1], a[2]))
    }
}
