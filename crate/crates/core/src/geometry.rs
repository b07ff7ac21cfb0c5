//! Poses and small rigid-body helpers shared by the world, perception and
//! grasping modules.
//!
//! Positions are meters in the robot base frame. Orientations are stored as
//! roll-pitch-yaw in degrees, composed in ZYX order (yaw, then pitch, then
//! roll), and normalized to (-180, 180].

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Wrap an angle in degrees into (-180, 180].
pub fn normalize_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    // -0.0 and 0.0 serialize differently
    if a == 0.0 {
        0.0
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    /// Roll, pitch, yaw in degrees.
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            position: [0.0; 3],
            rpy: [0.0; 3],
        }
    }

    pub fn new(position: [f64; 3], rpy: [f64; 3]) -> Self {
        Pose { position, rpy }.normalized()
    }

    pub fn from_position(position: [f64; 3]) -> Self {
        Pose {
            position,
            rpy: [0.0; 3],
        }
    }

    pub fn normalized(mut self) -> Self {
        for a in &mut self.rpy {
            *a = normalize_deg(*a);
        }
        self
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::from(self.position)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let [r, p, y] = self.rpy;
        UnitQuaternion::from_euler_angles(r.to_radians(), p.to_radians(), y.to_radians())
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation()), self.rotation())
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        let (r, p, y) = iso.rotation.euler_angles();
        let t = iso.translation.vector;
        Pose::new(
            [t.x, t.y, t.z],
            [r.to_degrees(), p.to_degrees(), y.to_degrees()],
        )
    }

    /// Map a point given in this pose's local frame into the parent frame.
    pub fn transform_point(&self, local: &Vec3) -> Vec3 {
        (self.to_isometry() * Point3::from(*local)).coords
    }

    /// Map a parent-frame point into this pose's local frame.
    pub fn inverse_transform_point(&self, world: &Vec3) -> Vec3 {
        (self.to_isometry().inverse() * Point3::from(*world)).coords
    }

    pub fn with_position(mut self, p: Vec3) -> Self {
        self.position = [p.x, p.y, p.z];
        self
    }

    pub fn yaw(&self) -> f64 {
        self.rpy[2]
    }

    /// Angle in degrees between this pose's local z axis and the base z axis.
    pub fn tilt_magnitude(&self) -> f64 {
        let z = self.rotation() * Vec3::z();
        z.z.clamp(-1.0, 1.0).acos().to_degrees()
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn contains_xy(&self, p: &Vec3, margin: f64) -> bool {
        p.x >= self.min.x - margin
            && p.x <= self.max.x + margin
            && p.y >= self.min.y - margin
            && p.y <= self.max.y + margin
    }

    /// Euclidean distance from `p` to the box (zero inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        let d = (self.min - p).sup(&(p - self.max)).sup(&Vec3::zeros());
        d.norm()
    }
}

pub fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::from(a)
}

pub fn arr3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normalize_wraps_into_half_open_interval() {
        assert_eq!(normalize_deg(180.0), 180.0);
        assert_eq!(normalize_deg(-180.0), 180.0);
        assert_eq!(normalize_deg(540.0), 180.0);
        assert_eq!(normalize_deg(-190.0), 170.0);
        assert_eq!(normalize_deg(359.0), -1.0);
        assert!(normalize_deg(-360.0).is_sign_positive());
    }

    #[test]
    fn isometry_round_trip() {
        let p = Pose::new([0.1, -0.2, 0.3], [10.0, -20.0, 135.0]);
        let q = Pose::from_isometry(&p.to_isometry());
        for i in 0..3 {
            assert_relative_eq!(p.position[i], q.position[i], epsilon = 1e-12);
            assert_relative_eq!(p.rpy[i], q.rpy[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn yaw_is_applied_about_base_z() {
        let p = Pose::new([0.0; 3], [0.0, 0.0, 90.0]);
        let v = p.transform_point(&Vec3::x());
        assert_relative_eq!(v, Vec3::y(), epsilon = 1e-12);
    }

    #[test]
    fn tilt_magnitude_ignores_yaw() {
        assert_relative_eq!(Pose::new([0.0; 3], [0.0, 0.0, 77.0]).tilt_magnitude(), 0.0, epsilon = 1e-6);
        assert_relative_eq!(Pose::new([0.0; 3], [0.0, 40.0, 77.0]).tilt_magnitude(), 40.0, epsilon = 1e-9);
    }

    #[test]
    fn aabb_distance() {
        let b = Aabb {
            min: Vec3::zeros(),
            max: Vec3::repeat(1.0),
        };
        assert_eq!(b.distance(&Vec3::repeat(0.5)), 0.0);
        assert_relative_eq!(b.distance(&Vec3::new(2.0, 0.5, 0.5)), 1.0);
    }
}
