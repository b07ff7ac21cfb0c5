//! Top-down grasp candidates on a mask and their selection.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::perception::camera::CameraModel;
use crate::perception::image::{DepthImage, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub u: u32,
    pub v: u32,
    /// In-plane angle of the gripper x axis, degrees counterclockwise seen
    /// from above. The jaws close perpendicular to it.
    pub angle_deg: f64,
    /// Jaw opening needed at this pixel and angle, meters.
    pub width: f64,
    /// Narrowest opening at this pixel over `width`.
    pub fit: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub stride: u32,
    pub angles: u32,
    pub max_opening: f64,
    /// Pixels deeper or shallower than this relative to the grasp pixel do
    /// not count toward the jaw width.
    pub depth_window: f64,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            stride: 4,
            angles: 8,
            max_opening: crate::world::MAX_JAW_OPENING_M,
            depth_window: 0.015,
        }
    }
}

const UNREACHED: f64 = 1e20;

/// Exact squared distance transform of a sampled function along one line.
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Euclidean distance from each mask pixel to the nearest pixel outside the
/// mask; pixels beyond the border count as outside. Zero off the mask.
pub fn distance_transform(mask: &Mask) -> Vec<f64> {
    let (w, h) = (mask.width as usize + 2, mask.height as usize + 2);
    let mut g = vec![0.0; w * h];
    for (u, v) in mask.pixels() {
        g[(v as usize + 1) * w + u as usize + 1] = UNREACHED;
    }
    let mut col = vec![0.0; h];
    let mut tmp = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = g[y * w + x];
        }
        edt_1d(&col, &mut tmp);
        for y in 0..h {
            g[y * w + x] = tmp[y];
        }
    }
    let mut row = vec![0.0; w];
    for y in 0..h {
        edt_1d(&g[y * w..(y + 1) * w], &mut row);
        g[y * w..(y + 1) * w].copy_from_slice(&row);
    }
    let mut out = vec![0.0; mask.data.len()];
    for (u, v) in mask.pixels() {
        out[(v * mask.width + u) as usize] = g[(v as usize + 1) * w + u as usize + 1].sqrt();
    }
    out
}

/// Pixels at least `px` pixels from the mask boundary.
pub fn erode(mask: &Mask, px: f64) -> Mask {
    let d = distance_transform(mask);
    Mask {
        width: mask.width,
        height: mask.height,
        data: d.iter().map(|x| *x > px).collect(),
    }
}

/// Image direction of the jaw closing axis for gripper angle `a`. Image v
/// points along base -y.
fn jaw_direction(angle_deg: f64) -> (f64, f64) {
    let a = angle_deg.to_radians();
    (-a.sin(), -a.cos())
}

/// Jaw opening needed at (u, v): the run of mask pixels through it along
/// the closing axis whose depth stays within the window, in meters.
pub fn jaw_width(mask: &Mask, depth: &DepthImage, cam: &CameraModel, u: u32, v: u32, angle_deg: f64, window: f64) -> f64 {
    let d0 = depth.get(u, v);
    let (du, dv) = jaw_direction(angle_deg);
    let run = |sign: f64| {
        let mut n = 0u32;
        loop {
            let s = sign * (n + 1) as f64;
            let pu = (u as f64 + du * s).round() as i64;
            let pv = (v as f64 + dv * s).round() as i64;
            if !mask.get_signed(pu, pv) || (depth.get(pu as u32, pv as u32) - d0).abs() > window {
                return n;
            }
            n += 1;
        }
    };
    let pixels = (run(1.0) + run(-1.0) + 1) as f64;
    pixels * d0 / cam.intrinsics.fx
}

pub fn angle_set(cfg: &CandidateConfig) -> Vec<f64> {
    (0..cfg.angles).map(|i| 180.0 * i as f64 / cfg.angles as f64).collect()
}

/// Feasible candidates on a stride grid anchored at the mask's bounding-box
/// corner. A candidate scores the normalized distance transform at its
/// pixel, discounted by how much wider it is than the narrowest angle there.
pub fn generate_grasps(mask: &Mask, depth: &DepthImage, cam: &CameraModel, cfg: &CandidateConfig) -> Vec<GraspCandidate> {
    let Some((u0, v0, u1, v1)) = mask.bbox() else {
        return Vec::new();
    };
    let dist = distance_transform(mask);
    let peak = dist.iter().cloned().fold(0.0, f64::max);
    let angles = angle_set(cfg);
    let stride = cfg.stride.max(1) as usize;
    let sites: Vec<(u32, u32)> = (v0..=v1)
        .step_by(stride)
        .flat_map(|v| (u0..=u1).step_by(stride).map(move |u| (u, v)))
        .filter(|&(u, v)| mask.get(u, v))
        .collect();
    sites
        .par_iter()
        .flat_map_iter(|&(u, v)| {
            let widths: Vec<f64> = angles
                .iter()
                .map(|a| jaw_width(mask, depth, cam, u, v, *a, cfg.depth_window))
                .collect();
            let narrowest = widths.iter().cloned().fold(f64::INFINITY, f64::min);
            let base = dist[(v * mask.width + u) as usize] / peak;
            angles
                .iter()
                .zip(widths)
                .filter(|(_, w)| *w <= cfg.max_opening)
                .map(|(a, w)| GraspCandidate {
                    u,
                    v,
                    angle_deg: *a,
                    width: w,
                    fit: narrowest / w,
                    score: base * narrowest / w,
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn better(a: &GraspCandidate, b: &GraspCandidate) -> Ordering {
    a.score
        .total_cmp(&b.score)
        .then_with(|| b.u.cmp(&a.u))
        .then_with(|| b.v.cmp(&a.v))
        .then_with(|| b.angle_deg.total_cmp(&a.angle_deg))
}

/// Best candidate inside `region`: depth inside the region in whole pixels
/// times fit, then nearness to the region centroid, then score. Remaining
/// ties go to the lowest (u, v, angle).
pub fn select_grasp(candidates: &[GraspCandidate], region: &Mask) -> Option<GraspCandidate> {
    let dist = distance_transform(region);
    let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0_f64);
    for (u, v) in region.pixels() {
        su += u as f64;
        sv += v as f64;
        n += 1.0;
    }
    let (cu, cv) = (su / n.max(1.0), sv / n.max(1.0));
    let key = |c: &GraspCandidate| dist[(c.v * region.width + c.u) as usize].round() * c.fit;
    let off = |c: &GraspCandidate| (c.u as f64 - cu).powi(2) + (c.v as f64 - cv).powi(2);
    candidates
        .iter()
        .filter(|c| region.get(c.u, c.v))
        .max_by(|a, b| {
            key(a)
                .total_cmp(&key(b))
                .then_with(|| off(b).total_cmp(&off(a)))
                .then_with(|| better(a, b))
        })
        .copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::perception::camera::Intrinsics;

    fn flat(w: u32, h: u32) -> (DepthImage, CameraModel) {
        let cam = CameraModel::overhead("wrist", Intrinsics::centered(w, h, 300.0), Vec3::new(0.0, 0.0, 0.3));
        let mut d = DepthImage::zeros(w, h);
        d.data.iter_mut().for_each(|x| *x = 0.3);
        (d, cam)
    }

    fn brute_edt(mask: &Mask) -> Vec<f64> {
        let (w, h) = (mask.width as i64, mask.height as i64);
        let mut out = vec![0.0; mask.data.len()];
        for (u, v) in mask.pixels() {
            let mut best = f64::INFINITY;
            for y in -1..=h {
                for x in -1..=w {
                    if !mask.get_signed(x, y) {
                        let d = ((x - u as i64).pow(2) + (y - v as i64).pow(2)) as f64;
                        best = best.min(d);
                    }
                }
            }
            out[(v * mask.width + u) as usize] = best.sqrt();
        }
        out
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let m = Mask::from_fn(23, 17, |u, v| (u + 2 * v) % 7 != 0 && u > 1 && v < 15);
        let fast = distance_transform(&m);
        let slow = brute_edt(&m);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn bar_grasps_sit_on_the_medial_axis() {
        let m = Mask::from_fn(60, 40, |u, v| (10..50).contains(&u) && (15..25).contains(&v));
        let (d, cam) = flat(60, 40);
        let cands = generate_grasps(&m, &d, &cam, &CandidateConfig::default());
        let best = select_grasp(&cands, &Mask::full(60, 40)).unwrap();
        let dist = brute_edt(&m);
        let top = m
            .pixels()
            .filter(|&(u, v)| (u - 10) % 4 == 0 && (v - 15) % 4 == 0)
            .map(|(u, v)| dist[(v * 60 + u) as usize])
            .fold(0.0, f64::max);
        assert_eq!(dist[(best.v * 60 + best.u) as usize], top);
        assert!((19..=20).contains(&best.v));
        // jaws close across the bar (along image v)
        assert_eq!(best.angle_deg, 0.0);
        assert!((best.width - 10.0 * 0.3 / 300.0).abs() < 1e-9);
    }

    #[test]
    fn too_wide_everywhere_is_empty() {
        // at 30 m every pixel spans 10 cm
        let m = Mask::full(20, 20);
        let (mut d, cam) = flat(20, 20);
        d.data.iter_mut().for_each(|x| *x = 30.0);
        assert!(generate_grasps(&m, &d, &cam, &CandidateConfig::default()).is_empty());
    }

    #[test]
    fn single_pixel_is_graspable() {
        let m = Mask::from_fn(9, 9, |u, v| u == 4 && v == 4);
        let (d, cam) = flat(9, 9);
        let c = generate_grasps(&m, &d, &cam, &CandidateConfig::default());
        assert_eq!(c.len(), 8);
        assert!(c.iter().all(|g| g.u == 4 && g.v == 4 && g.width <= 0.0011));
    }

    #[test]
    fn ties_break_on_lowest_pixel_then_angle() {
        let mk = |u, v, a| GraspCandidate {
            u,
            v,
            angle_deg: a,
            width: 0.01,
            fit: 1.0,
            score: 0.5,
        };
        let c = vec![mk(5, 0, 45.0), mk(4, 0, 90.0), mk(4, 0, 0.0), mk(6, 0, 0.0)];
        let best = select_grasp(&c, &Mask::full(10, 1)).unwrap();
        assert_eq!((best.u, best.v, best.angle_deg), (4, 0, 0.0));
        let mut rev = c.clone();
        rev.reverse();
        assert_eq!(select_grasp(&rev, &Mask::full(10, 1)), Some(best));
    }

    #[test]
    fn region_filters_candidates() {
        let mk = |u, score| GraspCandidate {
            u,
            v: 0,
            angle_deg: 0.0,
            width: 0.01,
            fit: 1.0,
            score,
        };
        let c = vec![mk(1, 0.9), mk(8, 0.4), mk(9, 0.3)];
        let handle = Mask::from_fn(10, 1, |u, _| u >= 5);
        assert_eq!(select_grasp(&c, &handle).unwrap().u, 8);
        assert!(select_grasp(&c, &Mask::empty(10, 1)).is_none());
    }

    #[test]
    fn depth_then_centrality_win_over_score() {
        let mk = |u, v, score| GraspCandidate {
            u,
            v,
            angle_deg: 0.0,
            width: 0.01,
            fit: 1.0,
            score,
        };
        let region = Mask::from_fn(20, 9, |_, v| (2..7).contains(&v));
        let c = vec![mk(10, 2, 0.9), mk(10, 4, 0.2)];
        assert_eq!(select_grasp(&c, &region).unwrap().v, 4);
        // along the handle, the middle wins over a higher score near an end
        let c = vec![mk(17, 4, 0.9), mk(10, 4, 0.2), mk(3, 4, 0.5)];
        assert_eq!(select_grasp(&c, &region).unwrap().u, 10);
    }
}
