use std::f64::consts::PI;

use nalgebra::{Point2, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::PlanError;

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Mobile base pose; `theta` is yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChassisPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl ChassisPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    pub fn position(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    pub fn distance(&self, other: &ChassisPose) -> f64 {
        (self.position() - other.position()).norm()
    }
}

/// End-effector (camera) pose. `phi` roll, `theta` pitch (positive up), `psi` yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EEPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EEPose {
    pub fn new(x: f64, y: f64, z: f64, phi: f64, theta: f64, psi: f64) -> Self {
        Self {
            x,
            y,
            z,
            phi: normalize_angle(phi),
            theta: normalize_angle(theta),
            psi: normalize_angle(psi),
        }
    }

    pub fn position(&self) -> Point3<f64> {
        Point3::new(self.x, self.y, self.z)
    }

    /// Camera frame in world: x forward, y left, z up. Applied yaw, then pitch, then roll.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.phi, -self.theta, self.psi)
    }

    pub fn from_rotation(position: Point3<f64>, rot: &Rotation3<f64>) -> Self {
        let (roll, pitch, yaw) = rot.euler_angles();
        Self::new(position.x, position.y, position.z, roll, -pitch, yaw)
    }

    /// Viewing direction `(cos t cos p, cos t sin p, sin t)`.
    pub fn view_direction(&self) -> Vector3<f64> {
        Vector3::new(
            self.theta.cos() * self.psi.cos(),
            self.theta.cos() * self.psi.sin(),
            self.theta.sin(),
        )
    }

    pub fn max_abs_diff(&self, o: &EEPose) -> f64 {
        [
            self.x - o.x,
            self.y - o.y,
            self.z - o.z,
            normalize_angle(self.phi - o.phi),
            normalize_angle(self.theta - o.theta),
            normalize_angle(self.psi - o.psi),
        ]
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub fov_h: f64,
    pub fov_v: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        // RealSense D435 colour field of view
        Self { fov_h: 87f64.to_radians(), fov_v: 58f64.to_radians(), near: 0.05, far: 3.0 }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), PlanError> {
        let ok_fov = |f: f64| f > 0.0 && f < PI;
        if !ok_fov(self.fov_h) || !ok_fov(self.fov_v) {
            return Err(PlanError::InvalidCamera(format!(
                "fields of view must lie in (0, pi): {} / {}",
                self.fov_h, self.fov_v
            )));
        }
        if !(self.near >= 0.0 && self.near < self.far) {
            return Err(PlanError::InvalidCamera(format!(
                "need 0 <= near < far, got near={} far={}",
                self.near, self.far
            )));
        }
        Ok(())
    }
}

/// Frustum test: azimuth/elevation of the point in the camera frame against the
/// half fields of view (strict), range against near/far (inclusive).
pub fn cone_covers(ee: &EEPose, cam: &CameraModel, p: &Point3<f64>) -> bool {
    ViewCone::new(ee, cam).covers(p)
}

/// [`cone_covers`] with the pose's inverse rotation computed once for many points.
#[derive(Debug, Clone, Copy)]
pub struct ViewCone {
    eye: Point3<f64>,
    to_camera: Rotation3<f64>,
    cam: CameraModel,
}

impl ViewCone {
    pub fn new(ee: &EEPose, cam: &CameraModel) -> Self {
        Self { eye: ee.position(), to_camera: ee.rotation().inverse(), cam: *cam }
    }

    pub fn covers(&self, p: &Point3<f64>) -> bool {
        let d = self.to_camera * (p - self.eye);
        let range = d.norm();
        if range < self.cam.near || range > self.cam.far {
            return false;
        }
        let azimuth = d.y.atan2(d.x);
        let elevation = d.z.atan2(d.x);
        azimuth.abs() < self.cam.fov_h / 2.0 && elevation.abs() < self.cam.fov_v / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraModel {
        CameraModel { fov_h: 90f64.to_radians(), fov_v: 60f64.to_radians(), near: 0.0, far: 10.0 }
    }

    #[test]
    fn on_axis_side_and_boundary() {
        let ee = EEPose::new(0., 0., 0., 0., 0., 0.);
        assert!(cone_covers(&ee, &cam(), &Point3::new(1., 0., 0.)));
        assert!(!cone_covers(&ee, &cam(), &Point3::new(0., 1., 0.)));
        assert!(!cone_covers(&ee, &cam(), &Point3::new(1., 1., 0.)));
    }

    #[test]
    fn looking_down_sees_below() {
        let ee = EEPose::new(0., 0., 1., 0., -PI / 2.0, 0.);
        assert!(cone_covers(&ee, &cam(), &Point3::new(0.0, 0.0, 0.5)));
        assert!(!cone_covers(&ee, &cam(), &Point3::new(0.0, 0.0, 1.5)));
    }

    #[test]
    fn range_limits() {
        let c = CameraModel { near: 0.5, far: 2.0, ..cam() };
        let ee = EEPose::new(0., 0., 0., 0., 0., 0.);
        assert!(!cone_covers(&ee, &c, &Point3::new(0.2, 0., 0.)));
        assert!(cone_covers(&ee, &c, &Point3::new(1.0, 0., 0.)));
        assert!(!cone_covers(&ee, &c, &Point3::new(2.5, 0., 0.)));
    }

    #[test]
    fn view_direction_matches_rotation() {
        let ee = EEPose::new(0., 0., 0., 0.3, -0.7, 2.1);
        let fwd = ee.rotation() * Vector3::x();
        assert!((fwd - ee.view_direction()).norm() < 1e-12);
    }

    #[test]
    fn rotation_roundtrip() {
        let ee = EEPose::new(1., 2., 3., 0.2, 0.4, -2.5);
        let back = EEPose::from_rotation(ee.position(), &ee.rotation());
        assert!(ee.max_abs_diff(&back) < 1e-12);
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn camera_validation() {
        assert!(cam().validate().is_ok());
        assert!(CameraModel { fov_h: PI, ..cam() }.validate().is_err());
        assert!(CameraModel { near: 3.0, far: 1.0, ..cam() }.validate().is_err());
    }
}
