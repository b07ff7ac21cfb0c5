//! Task-oriented grasping from an overhead wrist view.
//!
//! The wrist camera is placed above the perceived tool centroid, candidates
//! are generated on the tool mask, the database template of the most similar
//! tool is registered onto the mask, and the best candidate inside the
//! transferred graspable region is turned into a top-down grasp pose.

pub mod align;
pub mod candidates;
pub mod tooldb;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Vec3};
use crate::perception::camera::CameraModel;
use crate::perception::detect::{detect, DetectorConfig};
use crate::perception::image::{write_heatmap, DepthImage, Mask};
use crate::perception::render::{render_view, NoiseConfig};
use crate::perception::WristSpec;
use crate::world::WorldState;

pub use align::{align_masks, warp, AlignError, MaskAlignment, Moments};
pub use candidates::{distance_transform, generate_grasps, jaw_width, select_grasp, CandidateConfig, GraspCandidate};
pub use tooldb::{ToolDb, ToolDbEntry, ToolDbError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("{0} is not visible from the wrist camera")]
    NotVisible(String),
    #[error("no feasible grasp on {0}")]
    NoFeasibleGrasp(String),
}

/// Picks the database tool most similar to a query tool, or none.
pub trait ToolMapper {
    fn map_tool(&self, query_tool: &str, task: &str, db_tools: &[String]) -> Option<String>;
}

impl<F: Fn(&str, &str, &[String]) -> Option<String>> ToolMapper for F {
    fn map_tool(&self, query_tool: &str, task: &str, db_tools: &[String]) -> Option<String> {
        self(query_tool, task, db_tools)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspConfig {
    pub wrist: WristSpec,
    pub noise: NoiseConfig,
    pub detector: DetectorConfig,
    pub candidates: CandidateConfig,
    pub min_iou: f64,
    /// The transferred region is shrunk by this many pixels before selection.
    pub region_erosion_px: f64,
    /// Grasp centroid pixel instead of using the database region.
    pub no_affordance: bool,
}

impl GraspConfig {
    pub fn from_rig(rig: &crate::perception::RigConfig) -> Self {
        GraspConfig {
            wrist: rig.wrist,
            noise: rig.noise.clone(),
            detector: rig.detector.clone(),
            candidates: CandidateConfig::default(),
            min_iou: 0.5,
            region_erosion_px: 6.0,
            no_affordance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub camera: CameraModel,
    pub depth: DepthImage,
    pub mask: Mask,
}

/// Wrist view from `standoff` above `centroid`, with the detector's mask for
/// `query`. When several instances are detected the one nearest the image
/// center is kept.
pub fn overhead_capture(world: &WorldState, query: &str, centroid: &Vec3, cfg: &GraspConfig, seed: u64) -> Result<Capture, GraspError> {
    let camera = cfg.wrist.camera_above(centroid);
    let view = render_view(world, &camera, &cfg.noise, seed);
    let k = camera.intrinsics;
    let off_center = |m: &Mask| {
        let c = Moments::of(m).map(|mo| mo.centroid).unwrap_or([f64::INFINITY; 2]);
        (c[0] - k.cx).powi(2) + (c[1] - k.cy).powi(2)
    };
    let best = detect(&view, query, &cfg.detector, seed)
        .into_iter()
        .map(|d| d.mask)
        .min_by(|a, b| off_center(a).total_cmp(&off_center(b)))
        .ok_or_else(|| GraspError::NotVisible(query.to_string()))?;
    Ok(Capture {
        camera,
        depth: view.depth,
        mask: best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum GraspPath {
    /// Selected inside a database region transferred onto the query mask.
    Region { db_tool: String, alignment: MaskAlignment },
    /// Selected anywhere on the tool mask.
    WholeMask { reason: String },
    /// Centroid pixel of the mask, ignoring affordances.
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPlan {
    pub pose: Pose,
    pub candidate: GraspCandidate,
    pub path: GraspPath,
    pub wrist_camera: CameraModel,
}

/// Grasp pose for a pixel: deprojected through the wrist depth, sunk
/// halfway into the part (at most 1 cm) and yawed by the candidate angle.
pub fn grasp_pose(capture: &Capture, c: &GraspCandidate, table_height: f64) -> Pose {
    let d = capture.depth.get(c.u, c.v);
    let p = capture.camera.deproject(c.u as f64, c.v as f64, d);
    let sink = (0.5 * (p.z - table_height)).clamp(0.0, 0.01);
    Pose::new([p.x, p.y, p.z - sink], [0.0, 0.0, c.angle_deg])
}

/// Narrowest feasible angle at the mask pixel closest to the mask centroid.
pub fn centroid_grasp(capture: &Capture, cfg: &CandidateConfig) -> Option<GraspCandidate> {
    let m = Moments::of(&capture.mask)?;
    let (u, v) = capture.mask.pixels().min_by(|a, b| {
        let d = |p: &(u32, u32)| (p.0 as f64 - m.centroid[0]).powi(2) + (p.1 as f64 - m.centroid[1]).powi(2);
        d(a).total_cmp(&d(b)).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0))
    })?;
    let dist = distance_transform(&capture.mask);
    let peak = dist.iter().cloned().fold(0.0, f64::max);
    candidates::angle_set(cfg)
        .into_iter()
        .map(|a| GraspCandidate {
            u,
            v,
            angle_deg: a,
            width: jaw_width(&capture.mask, &capture.depth, &capture.camera, u, v, a, cfg.depth_window),
            fit: 1.0,
            score: dist[(v * capture.mask.width + u) as usize] / peak,
        })
        .filter(|c| c.width <= cfg.max_opening)
        .min_by(|a, b| a.width.total_cmp(&b.width).then(a.angle_deg.total_cmp(&b.angle_deg)))
}

/// Database region moved onto the query mask, clipped to it and eroded.
pub fn transfer_region(entry: &ToolDbEntry, alignment: &MaskAlignment, query: &Mask, erosion_px: f64) -> Mask {
    let moved = warp(&entry.region, alignment, query.width, query.height).intersection(query);
    candidates::erode(&moved, erosion_px)
}

/// Capture, generate, map, align, transfer, select and deproject.
pub fn task_oriented_grasp(
    world: &WorldState,
    tool: &str,
    centroid: &Vec3,
    task: &str,
    db: &ToolDb,
    mapper: &dyn ToolMapper,
    cfg: &GraspConfig,
    seed: u64,
) -> Result<GraspPlan, GraspError> {
    let capture = overhead_capture(world, tool, centroid, cfg, seed)?;
    let plan = |candidate: GraspCandidate, path: GraspPath| GraspPlan {
        pose: grasp_pose(&capture, &candidate, world.table_height),
        candidate,
        path,
        wrist_camera: capture.camera.clone(),
    };
    if cfg.no_affordance {
        let c = centroid_grasp(&capture, &cfg.candidates).ok_or_else(|| GraspError::NoFeasibleGrasp(tool.to_string()))?;
        return Ok(plan(c, GraspPath::Centroid));
    }
    let cands = generate_grasps(&capture.mask, &capture.depth, &capture.camera, &cfg.candidates);
    if cands.is_empty() {
        return Err(GraspError::NoFeasibleGrasp(tool.to_string()));
    }
    let reason = match mapper.map_tool(tool, task, &db.names()).and_then(|n| db.get(&n)) {
        None => "no similar database tool".to_string(),
        Some(entry) => {
            let mean_depth = capture.mask.pixels().map(|(u, v)| capture.depth.get(u, v)).sum::<f64>()
                / capture.mask.count() as f64;
            let query_mpp = mean_depth / capture.camera.intrinsics.fx;
            let expected = entry.meters_per_pixel / query_mpp;
            match align_masks(&entry.full, &capture.mask, Some(expected), cfg.min_iou) {
                Err(e) => e.to_string(),
                Ok(alignment) => {
                    let region = transfer_region(entry, &alignment, &capture.mask, cfg.region_erosion_px);
                    match select_grasp(&cands, &region) {
                        Some(c) => {
                            return Ok(plan(
                                c,
                                GraspPath::Region {
                                    db_tool: entry.name.clone(),
                                    alignment,
                                },
                            ))
                        }
                        None => "no candidate inside the transferred region".to_string(),
                    }
                }
            }
        }
    };
    let c = select_grasp(&cands, &capture.mask).expect("candidates are non-empty");
    Ok(plan(c, GraspPath::WholeMask { reason }))
}

/// Per-pixel best candidate score as a grayscale image.
pub fn dump_heatmap(path: &std::path::Path, mask: &Mask, cands: &[GraspCandidate]) -> std::io::Result<()> {
    let mut values = vec![0.0; mask.data.len()];
    for c in cands {
        let i = (c.v * mask.width + c.u) as usize;
        values[i] = f64::max(values[i], c.score);
    }
    write_heatmap(path, mask.width, mask.height, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::perception::RigConfig;
    use crate::world::shape::Composite;

    fn scene(tool: crate::world::SceneObject) -> WorldState {
        let mut w = WorldState::empty(0.0, Pose::new([0.3, 0.0, 0.4], [0.0; 3]));
        w.objects.push(tool);
        w
    }

    fn identity_mapper(q: &str, _: &str, db: &[String]) -> Option<String> {
        db.iter().find(|n| *n == q).cloned()
    }

    #[test]
    fn capture_projects_the_tool() {
        let w = scene(fixtures::scoop("scoop", [0.55, 0.05], 20.0));
        let cfg = GraspConfig::from_rig(&RigConfig::default());
        let c = w.objects[0].volume_centroid();
        let cap = overhead_capture(&w, "scoop", &c, &cfg, 1).unwrap();
        // top-down area of handle and head at about 1 mm per pixel
        let mpp = (0.30 - 0.0) / 300.0;
        let area_px = (0.10 * 0.022 + 0.08 * 0.06) / (mpp * mpp);
        assert!((cap.mask.count() as f64 / area_px - 1.0).abs() < 0.1, "{}", cap.mask.count());
        assert_eq!(cap, overhead_capture(&w, "scoop", &c, &cfg, 1).unwrap());
    }

    #[test]
    fn empty_world_capture_fails() {
        let w = scene(fixtures::tomato("tomato", [0.5, 0.0]));
        let cfg = GraspConfig::from_rig(&RigConfig::default());
        let err = overhead_capture(&w, "scoop", &Vec3::new(0.5, 0.0, 0.02), &cfg, 0).unwrap_err();
        assert_eq!(err, GraspError::NotVisible("scoop".into()));
    }

    #[test]
    fn scoop_grasp_lands_on_handle() {
        let db = ToolDb::bundled();
        let cfg = GraspConfig::from_rig(&RigConfig::default());
        for yaw in [0.0, 65.0, -120.0, 170.0] {
            let w = scene(fixtures::scoop("scoop", [0.55, -0.05], yaw));
            let tool = &w.objects[0];
            let g = task_oriented_grasp(&w, "scoop", &tool.volume_centroid(), "scoop", &db, &identity_mapper, &cfg, 3).unwrap();
            assert!(matches!(g.path, GraspPath::Region { .. }), "{:?}", g.path);
            let local = tool.pose.inverse_transform_point(&g.pose.translation());
            assert!(tool.graspable_region.unwrap().contains_local(&local, 0.005), "yaw {yaw}: {local:?}");
        }
    }

    #[test]
    fn unmapped_tool_falls_back_to_whole_mask() {
        let db = ToolDb::bundled();
        let cfg = GraspConfig::from_rig(&RigConfig::default());
        let w = scene(fixtures::skewer("skewer", [0.5, 0.0], 30.0));
        let never = |_: &str, _: &str, _: &[String]| None;
        let g = task_oriented_grasp(&w, "skewer", &w.objects[0].volume_centroid(), "poke", &db, &never, &cfg, 0).unwrap();
        assert!(matches!(g.path, GraspPath::WholeMask { .. }));
        let cap = overhead_capture(&w, "skewer", &w.objects[0].volume_centroid(), &cfg, 0).unwrap();
        assert!(cap.mask.get(g.candidate.u, g.candidate.v));
    }

    #[test]
    fn centroid_mode_grasps_scoop_head() {
        let db = ToolDb::bundled();
        let mut cfg = GraspConfig::from_rig(&RigConfig::default());
        cfg.no_affordance = true;
        let w = scene(fixtures::scoop("scoop", [0.55, 0.0], 40.0));
        let tool = &w.objects[0];
        let g = task_oriented_grasp(&w, "scoop", &tool.volume_centroid(), "scoop", &db, &identity_mapper, &cfg, 0).unwrap();
        assert_eq!(g.path, GraspPath::Centroid);
        let local = tool.pose.inverse_transform_point(&g.pose.translation());
        assert!(!tool.graspable_region.unwrap().contains_local(&local, 0.005));
    }
}
