//! Analytic ray casting of primitive scenes into depth and object-id images.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::image::DepthImage;
use crate::seeding;
use crate::world::shape::Composite;
use crate::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Standard deviation of additive Gaussian depth noise, meters.
    #[serde(default)]
    pub depth_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { depth_sigma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewObject {
    pub name: String,
    pub label: String,
    /// Pixels the object would cover with nothing in front of it.
    pub unoccluded_pixels: u32,
    /// Pixels where it is the nearest surface.
    pub visible_pixels: u32,
}

/// One rendered camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub camera: CameraModel,
    pub depth: DepthImage,
    /// Index into `objects` per pixel, -1 for background.
    pub ids: Vec<i32>,
    pub objects: Vec<ViewObject>,
}

impl View {
    pub fn visible_fraction(&self, index: usize) -> f64 {
        let o = &self.objects[index];
        if o.unoccluded_pixels == 0 {
            0.0
        } else {
            o.visible_pixels as f64 / o.unoccluded_pixels as f64
        }
    }
}

/// Pixel rectangle covering the object's projected bounding box, or the
/// whole image when any corner is behind the camera.
fn roi(cam: &CameraModel, obj: &impl Composite) -> Option<(u32, u32, u32, u32)> {
    let bb = obj.world_aabb();
    let k = &cam.intrinsics;
    let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..8 {
        let c = crate::geometry::Vec3::new(
            if i & 1 == 0 { bb.min.x } else { bb.max.x },
            if i & 2 == 0 { bb.min.y } else { bb.max.y },
            if i & 4 == 0 { bb.min.z } else { bb.max.z },
        );
        match cam.project(&c) {
            Some((u, v, _)) => {
                u0 = u0.min(u);
                v0 = v0.min(v);
                u1 = u1.max(u);
                v1 = v1.max(v);
            }
            None => return Some((0, 0, k.width - 1, k.height - 1)),
        }
    }
    let (w, h) = (k.width as f64 - 1.0, k.height as f64 - 1.0);
    if u1 < 0.0 || v1 < 0.0 || u0 > w || v0 > h {
        return None;
    }
    Some((
        u0.floor().max(0.0) as u32,
        v0.floor().max(0.0) as u32,
        u1.ceil().min(w) as u32,
        v1.ceil().min(h) as u32,
    ))
}

pub fn render_view(world: &WorldState, cam: &CameraModel, noise: &NoiseConfig, seed: u64) -> View {
    let k = cam.intrinsics;
    let mut depth = DepthImage::zeros(k.width, k.height);
    let mut ids = vec![-1i32; k.pixel_count()];
    let mut objects: Vec<ViewObject> = world
        .objects
        .iter()
        .map(|o| ViewObject {
            name: o.name.clone(),
            label: o.label().to_string(),
            unoccluded_pixels: 0,
            visible_pixels: 0,
        })
        .collect();
    let eye = cam.eye();
    for (i, obj) in world.objects.iter().enumerate() {
        let Some((u0, v0, u1, v1)) = roi(cam, obj) else {
            continue;
        };
        let inv = obj.pose.to_isometry().inverse();
        let origin = (inv * nalgebra::Point3::from(eye)).coords;
        for v in v0..=v1 {
            for u in u0..=u1 {
                let dir = inv.rotation * cam.pixel_ray(u as f64, v as f64);
                let hit = obj
                    .shape
                    .iter()
                    .filter_map(|p| p.ray_local(&origin, &dir))
                    .fold(f64::INFINITY, f64::min);
                if !hit.is_finite() {
                    continue;
                }
                objects[i].unoccluded_pixels += 1;
                let px = v as usize * k.width as usize + u as usize;
                if ids[px] < 0 || hit < depth.data[px] {
                    depth.data[px] = hit;
                    ids[px] = i as i32;
                }
            }
        }
    }
    for id in &ids {
        if *id >= 0 {
            objects[*id as usize].visible_pixels += 1;
        }
    }
    if noise.depth_sigma > 0.0 {
        let mut rng = seeding::stream(seed, &["depth-noise", &cam.id]);
        let n = Normal::new(0.0, noise.depth_sigma).expect("finite sigma");
        for d in depth.data.iter_mut().filter(|d| **d > 0.0) {
            *d = (*d + n.sample(&mut rng)).max(1e-6);
        }
    }
    View {
        camera: cam.clone(),
        depth,
        ids,
        objects,
    }
}

/// Render every camera; frames are independent and rendered in parallel.
pub fn render_views(world: &WorldState, cameras: &[CameraModel], noise: &NoiseConfig, seed: u64) -> Vec<View> {
    cameras
        .par_iter()
        .map(|c| render_view(world, c, noise, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::{Pose, Vec3};
    use crate::perception::camera::Intrinsics;

    fn down_cam() -> CameraModel {
        CameraModel::overhead("wrist", Intrinsics::centered(161, 121, 200.0), Vec3::new(0.5, 0.0, 0.5))
    }

    #[test]
    fn empty_world_renders_zero_depth() {
        let w = WorldState::empty(0.0, Pose::identity());
        let v = render_view(&w, &down_cam(), &NoiseConfig::default(), 0);
        assert!(v.depth.data.iter().all(|d| *d == 0.0));
        assert!(v.ids.iter().all(|i| *i == -1));
    }

    #[test]
    fn cube_top_face_at_analytic_depth() {
        let mut w = WorldState::empty(0.0, Pose::identity());
        w.objects.push(fixtures::block("block", [0.5, 0.0], 0.0));
        let cam = down_cam();
        let v = render_view(&w, &cam, &NoiseConfig::default(), 0);
        // principal point looks straight at the top face at z = 0.04
        let d = v.depth.get(80, 60);
        assert!((d - 0.46).abs() < 1e-12);
        // face half-width 0.02 m at depth 0.46 spans 200 * 0.02 / 0.46 px
        let half_px: f64 = 200.0 * 0.02 / 0.46;
        let covered = (0..161).filter(|u| v.ids[60 * 161 + u] == 0).count() as f64;
        assert!((covered - (2.0 * half_px).floor() - 1.0).abs() <= 1.0, "{covered}");
    }

    #[test]
    fn occlusion_reduces_visible_fraction() {
        let mut w = WorldState::empty(0.0, Pose::identity());
        w.objects.push(fixtures::plate("plate", [0.5, 0.0]));
        w.objects.push(fixtures::tomato("tomato", [0.5, 0.0]));
        w.objects[1].pose.position[2] = 0.035;
        let v = render_view(&w, &down_cam(), &NoiseConfig::default(), 0);
        assert!(v.visible_fraction(0) < 1.0);
        assert_eq!(v.visible_fraction(1), 1.0);
    }

    #[test]
    fn noise_is_seeded() {
        let mut w = WorldState::empty(0.0, Pose::identity());
        w.objects.push(fixtures::block("block", [0.5, 0.0], 0.0));
        let n = NoiseConfig { depth_sigma: 0.002 };
        let a = render_view(&w, &down_cam(), &n, 3);
        assert_eq!(a, render_view(&w, &down_cam(), &n, 3));
        assert_ne!(a, render_view(&w, &down_cam(), &n, 4));
    }
}
