//! Primitive solids used to compose scene objects.
//!
//! Every primitive lives in its object's local frame, displaced by `offset`.
//! Boxes are axis aligned in that frame; cylinders run along one local axis.

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Solid {
    Box {
        size: [f64; 3],
    },
    Cylinder {
        radius: f64,
        height: f64,
        #[serde(default)]
        axis: Axis,
    },
    Sphere {
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub solid: Solid,
    #[serde(default)]
    pub offset: [f64; 3],
}

impl Primitive {
    pub fn cuboid(size: [f64; 3], offset: [f64; 3]) -> Self {
        Primitive {
            solid: Solid::Box { size },
            offset,
        }
    }

    pub fn cylinder(radius: f64, height: f64, axis: Axis, offset: [f64; 3]) -> Self {
        Primitive {
            solid: Solid::Cylinder {
                radius,
                height,
                axis,
            },
            offset,
        }
    }

    pub fn sphere(radius: f64, offset: [f64; 3]) -> Self {
        Primitive {
            solid: Solid::Sphere { radius },
            offset,
        }
    }

    pub fn dimensions(&self) -> Vec<f64> {
        match self.solid {
            Solid::Box { size } => size.to_vec(),
            Solid::Cylinder { radius, height, .. } => vec![radius, height],
            Solid::Sphere { radius } => vec![radius],
        }
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from(self.offset)
    }

    pub fn volume(&self) -> f64 {
        match self.solid {
            Solid::Box { size } => size[0] * size[1] * size[2],
            Solid::Cylinder { radius, height, .. } => std::f64::consts::PI * radius * radius * height,
            Solid::Sphere { radius } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
        }
    }

    /// Half extents of the primitive along the object's local axes.
    pub fn local_half_extents(&self) -> Vec3 {
        match self.solid {
            Solid::Box { size } => Vec3::from(size) * 0.5,
            Solid::Cylinder {
                radius,
                height,
                axis,
            } => {
                let mut h = Vec3::repeat(radius);
                h[axis.index()] = height * 0.5;
                h
            }
            Solid::Sphere { radius } => Vec3::repeat(radius),
        }
    }

    pub fn local_aabb(&self) -> Aabb {
        let c = self.center();
        let h = self.local_half_extents();
        Aabb {
            min: c - h,
            max: c + h,
        }
    }

    /// Exact world-frame bounding box of this primitive under `pose`.
    pub fn world_aabb(&self, pose: &Pose) -> Aabb {
        let rot = pose.rotation().to_rotation_matrix();
        let m = rot.matrix();
        let c = pose.transform_point(&self.center());
        let half = match self.solid {
            Solid::Box { size } => {
                let h = Vec3::from(size) * 0.5;
                Vec3::new(
                    m[(0, 0)].abs() * h.x + m[(0, 1)].abs() * h.y + m[(0, 2)].abs() * h.z,
                    m[(1, 0)].abs() * h.x + m[(1, 1)].abs() * h.y + m[(1, 2)].abs() * h.z,
                    m[(2, 0)].abs() * h.x + m[(2, 1)].abs() * h.y + m[(2, 2)].abs() * h.z,
                )
            }
            Solid::Cylinder {
                radius,
                height,
                axis,
            } => {
                let a = m.column(axis.index()).into_owned();
                Vec3::from_fn(|i, _| {
                    height * 0.5 * a[i].abs() + radius * (1.0 - a[i] * a[i]).max(0.0).sqrt()
                })
            }
            Solid::Sphere { radius } => Vec3::repeat(radius),
        };
        Aabb {
            min: c - half,
            max: c + half,
        }
    }

    /// Point membership in the object's local frame.
    pub fn contains_local(&self, p: &Vec3) -> bool {
        let q = p - self.center();
        match self.solid {
            Solid::Box { size } => {
                q.x.abs() <= size[0] * 0.5 && q.y.abs() <= size[1] * 0.5 && q.z.abs() <= size[2] * 0.5
            }
            Solid::Cylinder {
                radius,
                height,
                axis,
            } => {
                let i = axis.index();
                let along = q[i];
                let radial2 = q.norm_squared() - along * along;
                along.abs() <= height * 0.5 && radial2 <= radius * radius
            }
            Solid::Sphere { radius } => q.norm_squared() <= radius * radius,
        }
    }

    pub fn closest_point_local(&self, p: &Vec3) -> Vec3 {
        let c = self.center();
        let q = p - c;
        let r = match self.solid {
            Solid::Box { size } => {
                let h = Vec3::from(size) * 0.5;
                Vec3::new(
                    q.x.clamp(-h.x, h.x),
                    q.y.clamp(-h.y, h.y),
                    q.z.clamp(-h.z, h.z),
                )
            }
            Solid::Cylinder {
                radius,
                height,
                axis,
            } => {
                let i = axis.index();
                let mut radial = q;
                radial[i] = 0.0;
                let n = radial.norm();
                if n > radius {
                    radial *= radius / n;
                }
                radial[i] = q[i].clamp(-height * 0.5, height * 0.5);
                radial
            }
            Solid::Sphere { radius } => {
                let n = q.norm();
                if n > radius {
                    q * (radius / n)
                } else {
                    q
                }
            }
        };
        c + r
    }

    /// Nearest ray parameter `t > 0` where `origin + t * dir` enters the solid.
    /// Rays starting inside report the exit point.
    pub fn ray_local(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let o = origin - self.center();
        match self.solid {
            Solid::Box { size } => slab(&o, dir, &(Vec3::from(size) * 0.5)),
            Solid::Sphere { radius } => {
                let b = o.dot(dir);
                let a = dir.norm_squared();
                let c = o.norm_squared() - radius * radius;
                first_root(a, b, c)
            }
            Solid::Cylinder {
                radius,
                height,
                axis,
            } => {
                let i = axis.index();
                let (j, k) = match i {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let half = height * 0.5;
                let mut best: Option<f64> = None;
                let mut consider = |t: f64| {
                    if t > 1e-9 && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                // side
                let a = dir[j] * dir[j] + dir[k] * dir[k];
                if a > 1e-18 {
                    let b = o[j] * dir[j] + o[k] * dir[k];
                    let c = o[j] * o[j] + o[k] * o[k] - radius * radius;
                    let disc = b * b - a * c;
                    if disc >= 0.0 {
                        let s = disc.sqrt();
                        for t in [(-b - s) / a, (-b + s) / a] {
                            let along = o[i] + t * dir[i];
                            if along.abs() <= half {
                                consider(t);
                            }
                        }
                    }
                }
                // caps
                if dir[i].abs() > 1e-18 {
                    for cap in [-half, half] {
                        let t = (cap - o[i]) / dir[i];
                        let pj = o[j] + t * dir[j];
                        let pk = o[k] + t * dir[k];
                        if pj * pj + pk * pk <= radius * radius {
                            consider(t);
                        }
                    }
                }
                best
            }
        }
    }
}

fn first_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = (-b - s) / a;
    let t1 = (-b + s) / a;
    if t0 > 1e-9 {
        Some(t0)
    } else if t1 > 1e-9 {
        Some(t1)
    } else {
        None
    }
}

fn slab(o: &Vec3, d: &Vec3, h: &Vec3) -> Option<f64> {
    let mut tmin = f64::NEG_INFINITY;
    let mut tmax = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-18 {
            if o[i].abs() > h[i] {
                return None;
            }
        } else {
            let t1 = (-h[i] - o[i]) / d[i];
            let t2 = (h[i] - o[i]) / d[i];
            let (a, b) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            tmin = tmin.max(a);
            tmax = tmax.min(b);
            if tmin > tmax {
                return None;
            }
        }
    }
    if tmin > 1e-9 {
        Some(tmin)
    } else if tmax > 1e-9 {
        Some(tmax)
    } else {
        None
    }
}

/// Helpers over a whole composition placed at a pose.
pub trait Composite {
    fn primitives(&self) -> &[Primitive];
    fn pose(&self) -> &Pose;

    fn world_aabb(&self) -> Aabb {
        self.primitives()
            .iter()
            .fold(Aabb::empty(), |acc, p| acc.union(&p.world_aabb(self.pose())))
    }

    fn contains_world(&self, p: &Vec3) -> bool {
        let local = self.pose().inverse_transform_point(p);
        self.primitives().iter().any(|s| s.contains_local(&local))
    }

    /// Distance from a world point to the nearest solid surface (0 inside).
    fn distance_world(&self, p: &Vec3) -> f64 {
        let local = self.pose().inverse_transform_point(p);
        self.primitives()
            .iter()
            .map(|s| {
                if s.contains_local(&local) {
                    0.0
                } else {
                    (s.closest_point_local(&local) - local).norm()
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn closest_point_world(&self, p: &Vec3) -> Vec3 {
        let local = self.pose().inverse_transform_point(p);
        let best = self
            .primitives()
            .iter()
            .map(|s| s.closest_point_local(&local))
            .min_by(|a, b| {
                (a - local)
                    .norm_squared()
                    .total_cmp(&(b - local).norm_squared())
            })
            .unwrap_or(local);
        self.pose().transform_point(&best)
    }

    /// Nearest hit distance along a world-frame ray.
    fn ray_world(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let iso = self.pose().to_isometry();
        let inv = iso.inverse();
        let o = (inv * nalgebra::Point3::from(*origin)).coords;
        let d = inv.rotation * dir;
        self.primitives()
            .iter()
            .filter_map(|s| s.ray_local(&o, &d))
            .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))))
    }

    fn volume(&self) -> f64 {
        self.primitives().iter().map(Primitive::volume).sum()
    }

    /// Center of mass of the union of the primitives, in the world frame.
    /// Overlapping primitives are counted once: the local bounding box is
    /// integrated on a 1 mm grid, or 64 cells per axis for larger shapes.
    fn volume_centroid(&self) -> Vec3 {
        let bb = self
            .primitives()
            .iter()
            .fold(Aabb::empty(), |acc, p| acc.union(&p.local_aabb()));
        let e = bb.extents();
        let cells = |len: f64| ((len / 0.001).ceil() as usize).clamp(1, 64);
        let (nx, ny, nz) = (cells(e.x), cells(e.y), cells(e.z));
        let step = Vec3::new(e.x / nx as f64, e.y / ny as f64, e.z / nz as f64);
        let mut sum = Vec3::zeros();
        let mut count = 0usize;
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let p = bb.min + Vec3::new((i as f64 + 0.5) * step.x, (j as f64 + 0.5) * step.y, (k as f64 + 0.5) * step.z);
                    if self.primitives().iter().any(|s| s.contains_local(&p)) {
                        sum += p;
                        count += 1;
                    }
                }
            }
        }
        let local = if count == 0 { bb.center() } else { sum / count as f64 };
        self.pose().transform_point(&local)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Placed(Vec<Primitive>, Pose);
    impl Composite for Placed {
        fn primitives(&self) -> &[Primitive] {
            &self.0
        }
        fn pose(&self) -> &Pose {
            &self.1
        }
    }

    #[test]
    fn ray_hits_box_top_face() {
        let b = Primitive::cuboid([0.04, 0.04, 0.04], [0.0, 0.0, 0.0]);
        let t = b
            .ray_local(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert_relative_eq!(t, 0.98, epsilon = 1e-12);
    }

    #[test]
    fn ray_hits_horizontal_cylinder_side() {
        let c = Primitive::cylinder(0.01, 0.1, Axis::X, [0.0; 3]);
        let t = c
            .ray_local(&Vec3::new(0.02, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert_relative_eq!(t, 0.99, epsilon = 1e-12);
        // past the end cap
        assert!(c
            .ray_local(&Vec3::new(0.06, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0))
            .is_none());
        // along the axis hits the cap
        let t = c
            .ray_local(&Vec3::new(1.0, 0.0, 0.0), &Vec3::new(-1.0, 0.0, 0.0))
            .unwrap();
        assert_relative_eq!(t, 0.95, epsilon = 1e-12);
    }

    #[test]
    fn sphere_miss_and_hit() {
        let s = Primitive::sphere(0.02, [0.0; 3]);
        assert!(s
            .ray_local(&Vec3::new(0.03, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0))
            .is_none());
        let t = s
            .ray_local(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert_relative_eq!(t, 0.98, epsilon = 1e-12);
    }

    #[test]
    fn rotated_cylinder_aabb_is_exact() {
        let c = Primitive::cylinder(0.01, 0.1, Axis::X, [0.0; 3]);
        let pose = Pose::new([0.0; 3], [0.0, 0.0, 90.0]);
        let bb = c.world_aabb(&pose);
        assert_relative_eq!(bb.extents(), Vec3::new(0.02, 0.1, 0.02), epsilon = 1e-12);
    }

    #[test]
    fn composite_distance_and_centroid() {
        let obj = Placed(
            vec![
                Primitive::cuboid([0.02, 0.02, 0.02], [0.0; 3]),
                Primitive::cuboid([0.02, 0.02, 0.02], [0.1, 0.0, 0.0]),
            ],
            Pose::from_position([1.0, 0.0, 0.0]),
        );
        assert_relative_eq!(obj.volume_centroid(), Vec3::new(1.05, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(obj.distance_world(&Vec3::new(1.05, 0.0, 0.0)), 0.04, epsilon = 1e-12);
        assert!(obj.contains_world(&Vec3::new(1.1, 0.0, 0.0)));
        let hit = obj
            .ray_world(&Vec3::new(1.1, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert_relative_eq!(hit, 0.99, epsilon = 1e-12);
    }
}
