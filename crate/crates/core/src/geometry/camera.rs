use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{Box3D, GeometryError, Pose, Vec3};

/// Pinhole intrinsics in pixels; no distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRepr", into = "IntrinsicsRepr")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl From<CameraIntrinsics> for IntrinsicsRepr {
    fn from(c: CameraIntrinsics) -> Self {
        IntrinsicsRepr { fx: c.fx, fy: c.fy, cx: c.cx, cy: c.cy, width: c.width, height: c.height }
    }
}

impl TryFrom<IntrinsicsRepr> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: IntrinsicsRepr) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        if !(cx > 0.0 && cx < f64::from(width) && cy > 0.0 && cy < f64::from(height)) {
            return Err(GeometryError::InvalidGeometry(format!(
                "principal point ({cx}, {cy}) outside a {width}x{height} image"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Intrinsics without the principal-point range check. Used for
    /// normalized-camera math (e.g. `K = I`), never for image filtering.
    pub fn unchecked(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        Self { fx, fy, cx, cy, width, height }
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn k(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Project a camera-frame point. `None` when depth is not positive.
    pub fn project(&self, p_cam: &Vec3) -> Option<(f64, f64)> {
        if p_cam.z <= 0.0 {
            return None;
        }
        Some((self.fx * p_cam.x / p_cam.z + self.cx, self.fy * p_cam.y / p_cam.z + self.cy))
    }
}

/// True iff the point lies in front of the camera and projects inside the
/// image grown by `margin_px` on every side.
pub fn in_fov(point_world: &Vec3, cam: &CameraIntrinsics, cam_pose: &Pose, margin_px: f64) -> bool {
    let p = cam_pose.inverse().transform_point(point_world);
    match cam.project(&p) {
        Some((u, v)) => {
            u >= -margin_px
                && u <= f64::from(cam.width) + margin_px
                && v >= -margin_px
                && v <= f64::from(cam.height) + margin_px
        }
        None => false,
    }
}

/// Number of points inside the box, boundary inclusive.
pub fn points_in_box(cloud: &[Vec3], bx: &Box3D) -> usize {
    let to_box = bx.pose().inverse();
    let half = bx.dims / 2.0;
    cloud
        .iter()
        .filter(|p| {
            let q = to_box.transform_point(p);
            q.x.abs() <= half.x && q.y.abs() <= half.y && q.z.abs() <= half.z
        })
        .count()
}

/// Distance difference (meters) and angle (degrees, in [0, 180]) between the
/// object-to-camera rays of two observations of the same object.
pub fn viewpoint_delta(query_cam: &Pose, ref_cam: &Pose, object_center: &Vec3) -> Result<(f64, f64), GeometryError> {
    let a = query_cam.translation - object_center;
    let b = ref_cam.translation - object_center;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(GeometryError::InvalidGeometry("camera coincides with object center".into()));
    }
    let alpha = a.cross(&b).norm().atan2(a.dot(&b)).to_degrees();
    Ok(((na - nb).abs(), alpha.clamp(0.0, 180.0)))
}
