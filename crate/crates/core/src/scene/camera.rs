use serde::{Deserialize, Serialize};

use super::geometry::{Mat3, Vec3};
use super::SceneError;
use crate::scalar::Scalar;

/// Pinhole intrinsics. Pixel centers sit at integer coordinates, `u` rightward,
/// `v` downward, so the image rectangle is `[-0.5, width - 0.5) × [-0.5, height - 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
}

impl<T: Scalar> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: u32, height: u32) -> Result<Self, SceneError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let w = T::lit(self.width as f64);
        let h = T::lit(self.height as f64);
        let ok = self.fx > T::zero()
            && self.fy > T::zero()
            && self.cx >= T::zero()
            && self.cx < w
            && self.cy >= T::zero()
            && self.cy < h;
        if ok {
            Ok(())
        } else {
            Err(SceneError::InvalidIntrinsics(format!(
                "fx={:?} fy={:?} cx={:?} cy={:?} size={}x{}",
                self.fx, self.fy, self.cx, self.cy, self.width, self.height
            )))
        }
    }

    /// Square pixels, principal point at the image center.
    pub fn centered(focal: T, width: u32, height: u32) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: T::lit((width as f64 - 1.0) * 0.5).max(T::zero()),
            cy: T::lit((height as f64 - 1.0) * 0.5).max(T::zero()),
            width,
            height,
        }
    }

    pub fn contains(&self, u: T, v: T) -> bool {
        let half = T::lit(0.5);
        u >= -half
            && v >= -half
            && u < T::lit(self.width as f64) - half
            && v < T::lit(self.height as f64) - half
    }

    /// Nearest pixel index for an in-rectangle coordinate.
    pub fn pixel_of(&self, u: T, v: T) -> Option<(u32, u32)> {
        if !self.contains(u, v) {
            return None;
        }
        let x = u.round().to_i64()?.clamp(0, self.width as i64 - 1) as u32;
        let y = v.round().to_i64()?.clamp(0, self.height as i64 - 1) as u32;
        Some((x, y))
    }

    pub fn cast<U: Scalar>(&self) -> CameraIntrinsics<U> {
        CameraIntrinsics {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            width: self.width,
            height: self.height,
        }
    }
}

/// World-to-camera rigid transform: `x_cam = rotation · x_world + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Scalar> CameraPose<T> {
    pub fn new(rotation: Mat3<T>, translation: Vec3<T>) -> Result<Self, SceneError> {
        if !rotation.is_rotation(T::lit(1e-6)) {
            return Err(SceneError::InvalidPose(format!("not a proper rotation: {rotation:?}")));
        }
        if !translation.is_finite() {
            return Err(SceneError::InvalidPose("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zero() }
    }

    /// Camera at `eye` looking at `target`; `up` fixes roll so the image `v` axis
    /// points along `-up` as far as possible.
    pub fn look_at(eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>) -> Result<Self, SceneError> {
        let forward = target - eye;
        if forward.norm() <= T::epsilon() {
            return Err(SceneError::InvalidPose("eye coincides with target".into()));
        }
        let forward = forward.normalized();
        let right = forward.cross(up);
        if right.norm() <= T::lit(1e-9) {
            return Err(SceneError::InvalidPose("view direction parallel to up".into()));
        }
        let right = right.normalized();
        let down = forward.cross(right);
        let rotation = Mat3::from_row_vectors(right, down, forward);
        let translation = -rotation.mul_vec(eye);
        Ok(Self { rotation, translation })
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3<T> {
        -self.rotation.transpose().mul_vec(self.translation)
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3<T> {
        self.rotation.row(2)
    }

    pub fn world_to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn camera_to_world_dir(&self, d: Vec3<T>) -> Vec3<T> {
        self.rotation.transpose().mul_vec(d)
    }

    pub fn cast<U: Scalar>(&self) -> CameraPose<U> {
        CameraPose { rotation: self.rotation.cast(), translation: self.translation.cast() }
    }
}

/// `r(t) = origin + t · direction` for `t ∈ [near, far]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    pub direction: Vec3<T>,
    pub near: T,
    pub far: T,
}

impl<T: Scalar> Ray<T> {
    pub fn new(origin: Vec3<T>, direction: Vec3<T>, near: T, far: T) -> Result<Self, SceneError> {
        let n = direction.norm();
        if !n.is_finite() || n <= T::zero() {
            return Err(SceneError::InvalidRay("zero or non-finite direction".into()));
        }
        if !(near >= T::zero() && near < far) {
            return Err(SceneError::InvalidRay(format!("bad interval [{near:?}, {far:?}]")));
        }
        Ok(Self { origin, direction: direction * (T::one() / n), near, far })
    }

    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.direction * t
    }

    pub fn with_interval(&self, near: T, far: T) -> Self {
        Self { near, far, ..*self }
    }
}

/// Pixel position plus camera-frame depth (distance along the optical axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T> {
    pub u: T,
    pub v: T,
    pub depth: T,
}

/// Pinhole projection; `None` behind the camera or outside the image rectangle.
pub fn project_point<T: Scalar>(
    p: Vec3<T>,
    intrinsics: &CameraIntrinsics<T>,
    pose: &CameraPose<T>,
) -> Option<Projection<T>> {
    let pc = pose.world_to_camera(p);
    if pc.z <= T::zero() {
        return None;
    }
    let u = intrinsics.fx * pc.x / pc.z + intrinsics.cx;
    let v = intrinsics.fy * pc.y / pc.z + intrinsics.cy;
    intrinsics.contains(u, v).then_some(Projection { u, v, depth: pc.z })
}

/// Same as [`project_point`] but without the image-rectangle check.
pub fn project_unbounded<T: Scalar>(
    p: Vec3<T>,
    intrinsics: &CameraIntrinsics<T>,
    pose: &CameraPose<T>,
) -> Option<Projection<T>> {
    let pc = pose.world_to_camera(p);
    if pc.z <= T::zero() {
        return None;
    }
    Some(Projection {
        u: intrinsics.fx * pc.x / pc.z + intrinsics.cx,
        v: intrinsics.fy * pc.y / pc.z + intrinsics.cy,
        depth: pc.z,
    })
}

/// Unit world-space direction through pixel `(u, v)`.
pub fn pixel_direction<T: Scalar>(
    u: T,
    v: T,
    intrinsics: &CameraIntrinsics<T>,
    pose: &CameraPose<T>,
) -> Vec3<T> {
    let dc = Vec3::new((u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy, T::one());
    pose.camera_to_world_dir(dc).normalized()
}

pub fn ray_for_pixel<T: Scalar>(
    u: T,
    v: T,
    intrinsics: &CameraIntrinsics<T>,
    pose: &CameraPose<T>,
    near: T,
    far: T,
) -> Result<Ray<T>, SceneError> {
    if !intrinsics.contains(u, v) {
        return Err(SceneError::PixelOutOfBounds {
            u: u.as_f64(),
            v: v.as_f64(),
            width: intrinsics.width,
            height: intrinsics.height,
        });
    }
    Ray::new(pose.center(), pixel_direction(u, v, intrinsics, pose), near, far)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k100() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 101, 101).unwrap()
    }

    #[test]
    fn on_axis_projects_to_principal_point() {
        let p = project_point(Vec3::new(0.0, 0.0, 2.0), &k100(), &CameraPose::identity()).unwrap();
        assert_eq!((p.u, p.v, p.depth), (50.0, 50.0, 2.0));
    }

    #[test]
    fn behind_camera_is_empty() {
        assert!(project_point(Vec3::new(0.0, 0.0, -1.0), &k100(), &CameraPose::identity()).is_none());
    }

    #[test]
    fn off_axis_hand_computation() {
        let k = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 200, 101).unwrap();
        let p = project_point(Vec3::new(1.0, 0.0, 2.0), &k, &CameraPose::identity()).unwrap();
        assert_eq!(p.u, 100.0);
        assert_eq!(p.v, 50.0);
    }

    #[test]
    fn outside_rectangle_is_empty() {
        assert!(project_point(Vec3::new(1.0, 0.0, 1.0), &k100(), &CameraPose::identity()).is_none());
    }

    #[test]
    fn principal_ray_is_optical_axis() {
        let r = ray_for_pixel(50.0, 50.0, &k100(), &CameraPose::identity(), 0.1, 10.0).unwrap();
        assert!((r.direction - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
        assert_eq!(r.origin, Vec3::zero());
    }

    #[test]
    fn yawed_camera_rotates_direction() {
        // camera at origin looking along world +x (a 90 degree yaw from +z)
        let rot = Mat3::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), -std::f64::consts::FRAC_PI_2);
        let pose = CameraPose::new(rot, Vec3::zero()).unwrap();
        let r = ray_for_pixel(50.0, 50.0, &k100(), &pose, 0.1, 10.0).unwrap();
        let expected = rot.transpose().mul_vec(Vec3::new(0.0, 0.0, 1.0));
        assert!((r.direction - expected).norm() < 1e-12);
        assert!((r.direction.norm() - 1.0).abs() < 1e-12);
        assert!((r.direction - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_out_of_rectangle_pixel() {
        assert!(ray_for_pixel(-1.0, 3.0, &k100(), &CameraPose::identity(), 0.1, 1.0).is_err());
        assert!(ray_for_pixel(100.5, 3.0, &k100(), &CameraPose::identity(), 0.1, 1.0).is_err());
    }

    #[test]
    fn look_at_orientation() {
        let pose = CameraPose::look_at(
            Vec3::new(-4.0, 0.0, 0.0),
            Vec3::zero(),
            Vec3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        assert!(pose.rotation.is_rotation(1e-12));
        assert!((pose.center() - Vec3::new(-4.0, 0.0, 0.0)).norm() < 1e-12);
        // a point above the target appears in the upper half of the image
        let up = pose.world_to_camera(Vec3::new(0.0, 0.0, 1.0));
        assert!(up.y < 0.0);
    }

    #[test]
    fn depth_is_axial_not_ray_length() {
        let p = Vec3::new(1.0, 0.0, 2.0);
        let k = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 200, 101).unwrap();
        let proj = project_point(p, &k, &CameraPose::identity()).unwrap();
        assert_eq!(proj.depth, 2.0);
        assert!(p.norm() > proj.depth);
    }

    proptest! {
        #[test]
        fn project_inverts_ray_for_pixel(
            u in 0.0f64..127.0, v in 0.0f64..95.0, t in 0.2f64..20.0,
            yaw in -3.0f64..3.0, pitch in -1.0f64..1.0,
            tx in -2.0f64..2.0, ty in -2.0f64..2.0, tz in -2.0f64..2.0,
        ) {
            let k = CameraIntrinsics::new(90.0, 110.0, 63.5, 47.5, 128, 96).unwrap();
            let rot = Mat3::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), yaw)
                .mul_mat(&Mat3::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), pitch));
            let pose = CameraPose::new(rot, Vec3::new(tx, ty, tz)).unwrap();
            let ray = ray_for_pixel(u, v, &k, &pose, 0.1, 30.0).unwrap();
            prop_assert!((ray.direction.norm() - 1.0).abs() < 1e-9);
            let p = project_point(ray.at(t), &k, &pose).unwrap();
            prop_assert!((p.u - u).abs() < 1e-6 && (p.v - v).abs() < 1e-6);
        }
    }
}
