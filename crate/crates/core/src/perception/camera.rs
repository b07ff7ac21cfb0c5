//! Pinhole cameras with OpenCV axes: x right, y down, z forward.

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    /// Centered principal point.
    pub fn centered(width: u32, height: u32, focal: f64) -> Self {
        Intrinsics {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) * 0.5,
            cy: (height as f64 - 1.0) * 0.5,
            width,
            height,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.fx > 0.0 && self.fy > 0.0 && self.width > 0 && self.height > 0
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub id: String,
    pub intrinsics: Intrinsics,
    /// Camera frame expressed in the base frame.
    #[serde(with = "iso_as_pose")]
    pub extrinsics: Isometry3<f64>,
}

mod iso_as_pose {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(iso: &Isometry3<f64>, s: S) -> Result<S::Ok, S::Error> {
        Pose::from_isometry(iso).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Isometry3<f64>, D::Error> {
        Ok(Pose::deserialize(d)?.to_isometry())
    }
}

impl CameraModel {
    /// Camera at `eye` looking at `target`, image up roughly along +z.
    pub fn look_at(id: &str, intrinsics: Intrinsics, eye: Vec3, target: Vec3) -> Self {
        let z = (target - eye).normalize();
        let up = if z.cross(&Vec3::z()).norm() < 1e-6 {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let x = z.cross(&up).normalize();
        let y = z.cross(&x);
        Self::from_axes(id, intrinsics, eye, x, y, z)
    }

    /// Camera at `eye` looking straight down with image u along base +x and
    /// v along base -y, so an image direction at angle a (counterclockwise
    /// seen from above) is the base-frame direction at yaw a.
    pub fn overhead(id: &str, intrinsics: Intrinsics, eye: Vec3) -> Self {
        Self::from_axes(id, intrinsics, eye, Vec3::x(), -Vec3::y(), -Vec3::z())
    }

    fn from_axes(id: &str, intrinsics: Intrinsics, eye: Vec3, x: Vec3, y: Vec3, z: Vec3) -> Self {
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
        CameraModel {
            id: id.to_string(),
            intrinsics,
            extrinsics: Isometry3::from_parts(
                Translation3::from(eye),
                UnitQuaternion::from_rotation_matrix(&rot),
            ),
        }
    }

    pub fn eye(&self) -> Vec3 {
        self.extrinsics.translation.vector
    }

    pub fn is_wrist(&self) -> bool {
        self.id == "wrist"
    }

    /// Base-frame point to (u, v, depth). None behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let c = self.extrinsics.inverse_transform_vector(&(p - self.eye()));
        if c.z <= 1e-9 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy, c.z))
    }

    /// Base-frame direction through pixel (u, v), scaled so that its camera-z
    /// component is 1: `eye + depth * ray` is the deprojected point.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        let k = &self.intrinsics;
        let c = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        self.extrinsics.rotation * c
    }

    pub fn deproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        self.eye() + self.pixel_ray(u, v) * depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn principal_point_identity() {
        let cam = CameraModel {
            id: "1".into(),
            intrinsics: Intrinsics::centered(641, 481, 500.0),
            extrinsics: Isometry3::identity(),
        };
        let p = cam.deproject(320.0, 240.0, 1.0);
        assert_relative_eq!(p, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn look_at_axes() {
        let cam = CameraModel::look_at(
            "1",
            Intrinsics::centered(640, 480, 600.0),
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        );
        // image right is base -y, image down is base -z
        assert_relative_eq!(cam.extrinsics.rotation * Vec3::x(), -Vec3::y(), epsilon = 1e-12);
        assert_relative_eq!(cam.extrinsics.rotation * Vec3::y(), -Vec3::z(), epsilon = 1e-12);
    }

    #[test]
    fn overhead_direction_convention() {
        let cam = CameraModel::overhead("wrist", Intrinsics::centered(320, 240, 300.0), Vec3::new(0.5, 0.0, 0.3));
        let (u0, v0, _) = cam.project(&Vec3::new(0.5, 0.0, 0.0)).unwrap();
        let (u1, v1, _) = cam.project(&Vec3::new(0.5, 0.1, 0.0)).unwrap();
        // +y in the base frame is up in the image (90 degrees counterclockwise)
        assert_relative_eq!(u1, u0, epsilon = 1e-9);
        assert!(v1 < v0);
    }

    #[test]
    fn round_trip_within_half_pixel() {
        let cam = CameraModel::look_at(
            "2",
            Intrinsics::centered(640, 480, 615.0),
            Vec3::new(0.0, 0.6, 0.3),
            Vec3::new(0.55, 0.0, 0.0),
        );
        for (u, v, d) in [(10.0, 20.0, 0.5), (600.0, 400.0, 1.3), (320.0, 17.0, 0.9)] {
            let p = cam.deproject(u, v, d);
            let (pu, pv, pd) = cam.project(&p).unwrap();
            assert!((pu - u).abs() < 0.5 && (pv - v).abs() < 0.5);
            assert_relative_eq!(pd, d, epsilon = 1e-9);
        }
    }
}
