use nalgebra::{Matrix3, Matrix3x4, Matrix4};
use serde::{Deserialize, Serialize};

use super::{vec3_serde, CameraIntrinsics, GeometryError, Pose, Vec3};

/// Upright 3D box: center, full extents and yaw about +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    #[serde(with = "vec3_serde")]
    pub center: Vec3,
    #[serde(with = "vec3_serde")]
    pub dims: Vec3,
    pub yaw: f64,
}

impl Box3D {
    pub fn new(center: Vec3, dims: Vec3, yaw: f64) -> Result<Self, GeometryError> {
        let b = Self { center, dims, yaw };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(GeometryError::InvalidGeometry(format!(
                "box dimensions must be positive, got [{}, {}, {}]",
                self.dims.x, self.dims.y, self.dims.z
            )));
        }
        if !self.center.iter().all(|c| c.is_finite()) || !self.yaw.is_finite() {
            return Err(GeometryError::InvalidGeometry("non-finite box".into()));
        }
        Ok(())
    }

    /// Box-to-parent transform.
    pub fn pose(&self) -> Pose {
        Pose::from_yaw(self.yaw, self.center)
    }

    /// Re-express the box in another frame. Yaw is taken from the rotated
    /// box x axis, so roll and pitch of `pose` are dropped.
    pub fn transformed(&self, pose: &Pose) -> Box3D {
        let heading = pose.compose(&self.pose()).yaw();
        Box3D { center: pose.transform_point(&self.center), dims: self.dims, yaw: heading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub pose: Pose,
    pub semi_axes: Vec3,
}

impl Ellipsoid {
    /// Dual quadric `Q = Z · diag(a², b², c², -1) · Zᵀ`, with `Z` the
    /// homogeneous ellipsoid pose.
    pub fn dual_quadric(&self) -> DualQuadric {
        let z = self.pose.to_matrix();
        let s = self.semi_axes;
        let d = Matrix4::from_diagonal(&nalgebra::Vector4::new(s.x * s.x, s.y * s.y, s.z * s.z, -1.0));
        let q = z * d * z.transpose();
        DualQuadric((q + q.transpose()) * 0.5)
    }

    /// Point on the surface for a direction `u` on the unit sphere.
    pub fn surface_point(&self, u: &Vec3) -> Vec3 {
        self.pose.transform_point(&self.semi_axes.component_mul(u))
    }
}

/// Dual (tangent-plane) form of a quadric surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualQuadric(pub Matrix4<f64>);

impl DualQuadric {
    /// Center of the quadric, `Q[0..3, 3] / Q[3, 3]`.
    pub fn center(&self) -> Option<Vec3> {
        let w = self.0[(3, 3)];
        if w == 0.0 {
            return None;
        }
        Some(Vec3::new(self.0[(0, 3)], self.0[(1, 3)], self.0[(2, 3)]) / w)
    }
}

/// Dual (tangent-line) form of an image conic.
///
/// Sign convention: [`conic_to_bbox`] rescales `C` so that `C[2][2] < 0`.
/// With that normalization the ellipse center is `(C13 / C33, C23 / C33)`
/// and the point-conic form `adj(C)` is negative definite on the ellipse
/// interior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualConic(pub Matrix3<f64>);

impl DualConic {
    pub fn center(&self) -> Option<(f64, f64)> {
        let w = self.0[(2, 2)];
        (w != 0.0).then(|| (self.0[(0, 2)] / w, self.0[(1, 2)] / w))
    }
}

/// Axis-aligned image box in (sub)pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox2D {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(GeometryError::InvalidGeometry(format!("empty bbox ({x_min}, {y_min}, {x_max}, {y_max})")));
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    /// Intersection with `[0, width] × [0, height]`; `None` when empty.
    pub fn clip(&self, width: u32, height: u32) -> Option<BBox2D> {
        let (w, h) = (f64::from(width), f64::from(height));
        BBox2D::new(self.x_min.max(0.0), self.y_min.max(0.0), self.x_max.min(w), self.y_max.min(h)).ok()
    }

    pub fn contains(&self, other: &BBox2D, tol: f64) -> bool {
        other.x_min >= self.x_min - tol
            && other.y_min >= self.y_min - tol
            && other.x_max <= self.x_max + tol
            && other.y_max <= self.y_max + tol
    }
}

/// Ellipsoid tangent to all six faces of the box.
pub fn inscribe_ellipsoid(bx: &Box3D) -> Result<Ellipsoid, GeometryError> {
    bx.validate()?;
    Ok(Ellipsoid { pose: bx.pose(), semi_axes: bx.dims / 2.0 })
}

/// `C = P Q Pᵀ` with `P = K [R | t]` the world-to-pixel projection of a
/// camera whose camera-to-world pose is `cam_pose_world`.
pub fn project_quadric(
    q: &DualQuadric,
    cam: &CameraIntrinsics,
    cam_pose_world: &Pose,
) -> Result<DualConic, GeometryError> {
    let extrinsic = cam_pose_world.inverse();
    let center = q.center().ok_or_else(|| GeometryError::InvalidGeometry("quadric has no finite center".into()))?;
    let depth = extrinsic.transform_point(&center).z;
    if !(depth > 0.0) {
        return Err(GeometryError::BehindCamera { depth });
    }
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&extrinsic.rotation_matrix());
    rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&extrinsic.translation);
    let p = cam.k() * rt;
    let c = p * q.0 * p.transpose();
    Ok(DualConic((c + c.transpose()) * 0.5))
}

/// Tight axis-aligned box of the ellipse described by a dual conic.
///
/// Vertical tangent lines `(1, 0, -u)` satisfy `C11 - 2u C13 + u² C33 = 0`,
/// so `u = (C13 ± √(C13² - C11 C33)) / C33`; likewise for `v` with indices
/// (2, 3) and (2, 2).
pub fn conic_to_bbox(c: &DualConic) -> Result<BBox2D, GeometryError> {
    let mut m = c.0;
    if !m.iter().all(|x| x.is_finite()) {
        return Err(GeometryError::DegenerateConic("non-finite entries".into()));
    }
    if m[(2, 2)] == 0.0 {
        return Err(GeometryError::DegenerateConic("C33 = 0 (tangent to the line at infinity)".into()));
    }
    if m[(2, 2)] > 0.0 {
        m = -m;
    }
    // ellipse (bounded) iff the point conic's quadratic part is definite,
    // which for the dual form reduces to C33 · det(C) > 0
    if !(m[(2, 2)] * m.determinant() > 0.0) {
        return Err(GeometryError::DegenerateConic("conic is not a real ellipse".into()));
    }
    let disc_x = m[(0, 2)] * m[(0, 2)] - m[(0, 0)] * m[(2, 2)];
    let disc_y = m[(1, 2)] * m[(1, 2)] - m[(1, 1)] * m[(2, 2)];
    if disc_x < 0.0 || disc_y < 0.0 {
        return Err(GeometryError::DegenerateConic(format!("negative discriminant ({disc_x}, {disc_y})")));
    }
    let w = m[(2, 2)];
    let (sx, sy) = (disc_x.sqrt(), disc_y.sqrt());
    let (x1, x2) = ((m[(0, 2)] + sx) / w, (m[(0, 2)] - sx) / w);
    let (y1, y2) = ((m[(1, 2)] + sy) / w, (m[(1, 2)] - sy) / w);
    BBox2D::new(x1.min(x2), y1.min(y2), x1.max(x2), y1.max(y2))
        .map_err(|_| GeometryError::DegenerateConic("zero-area ellipse".into()))
}
