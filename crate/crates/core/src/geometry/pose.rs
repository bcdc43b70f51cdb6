use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::Vec3;

/// Rigid transform: unit-quaternion rotation plus translation in meters.
///
/// Serialized as `{"q": [w, x, y, z], "t": [x, y, z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    q: [f64; 4],
    t: [f64; 3],
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.rotation.quaternion();
        PoseRepr { q: [q.w, q.i, q.j, q.k], t: [p.translation.x, p.translation.y, p.translation.z] }
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = String;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        let q = Quaternion::new(r.q[0], r.q[1], r.q[2], r.q[3]);
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(format!("quaternion norm {n} is not 1"));
        }
        if r.t.iter().any(|x| !x.is_finite()) {
            return Err("non-finite translation".into());
        }
        Ok(Pose { rotation: UnitQuaternion::from_quaternion(q), translation: Vec3::new(r.t[0], r.t[1], r.t[2]) })
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(UnitQuaternion::identity(), t)
    }

    /// Rotation about +z by `yaw` radians, then translation.
    pub fn from_yaw(yaw: f64, t: Vec3) -> Self {
        Self::new(UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw), t)
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r = self.rotation.inverse();
        Pose { rotation: r, translation: -(r * self.translation) }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Homogeneous 4×4 matrix `[R t; 0 1]`.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Heading of the rotated x axis projected on the xy plane, in (-π, π].
    pub fn yaw(&self) -> f64 {
        let x = self.rotation * Vec3::x();
        normalize_angle(x.y.atan2(x.x))
    }

    /// Interpolate between two poses: linear translation, slerp rotation.
    pub fn interpolate(&self, other: &Pose, s: f64) -> Pose {
        let rotation = self.rotation.try_slerp(&other.rotation, s, 1e-12).unwrap_or(self.rotation);
        Pose { rotation, translation: self.translation.lerp(&other.translation, s) }
    }

    /// Max absolute deviation between two poses, comparing the rotation
    /// matrices (sign-independent) and translations.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        let dr = (self.rotation_matrix() - other.rotation_matrix()).abs().max();
        let dt = (self.translation - other.translation).abs().max();
        dr.max(dt)
    }
}

/// Wrap an angle into (-π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pose_strategy() -> impl Strategy<Value = Pose> {
        (prop::array::uniform4(-1.0f64..1.0), prop::array::uniform3(-100.0f64..100.0))
            .prop_filter("non-degenerate quaternion", |(q, _)| q.iter().map(|x| x * x).sum::<f64>() > 1e-3)
            .prop_map(|(q, t)| {
                Pose::new(
                    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])),
                    Vec3::new(t[0], t[1], t[2]),
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn group_laws(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
            prop_assert!((a.rotation.quaternion().norm() - 1.0).abs() < 1e-9);
            prop_assert!(a.compose(&a.inverse()).max_abs_diff(&Pose::identity()) < 1e-9);
            prop_assert!(a.inverse().compose(&a).max_abs_diff(&Pose::identity()) < 1e-9);
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!(left.max_abs_diff(&right) < 1e-9);
            prop_assert!(a.compose(&Pose::identity()).max_abs_diff(&a) < 1e-12);
        }
    }

    #[test]
    fn matrix_matches_transform() {
        let p = Pose::from_yaw(0.7, Vec3::new(1.0, -2.0, 3.0));
        let x = Vec3::new(0.3, 0.4, -0.5);
        let h = p.to_matrix() * x.push(1.0);
        assert!((h.xyz() - p.transform_point(&x)).norm() < 1e-12);
    }

    #[test]
    fn serde_shape() {
        let p = Pose::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"q":[1.0,0.0,0.0,0.0],"t":[1.0,2.0,3.0]}"#);
        let back: Pose = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Pose>(r#"{"q":[2,0,0,0],"t":[0,0,0]}"#).is_err());
    }

    #[test]
    fn angle_wrap() {
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(0.25) - 0.25).abs() < 1e-15);
        assert!((normalize_angle(-0.25) + 0.25).abs() < 1e-15);
    }
}
