//! Simulated camera rig and the multi-view object localization pipeline:
//! render, detect, deproject, fuse, denoise, extract.

pub mod camera;
pub mod detect;
pub mod fuse;
pub mod image;
pub mod render;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::{CameraModel, Intrinsics};
pub use detect::{deproject, detect, Detection, DetectorConfig, PartialCloud};
pub use fuse::{aggregate_logit, denoise, dump_cloud, extract_geometry, fuse, voxel_downsample, FusedObject, FusionConfig};
pub use image::{DepthImage, Mask};
pub use render::{render_view, render_views, NoiseConfig, View};

use crate::geometry::{Pose, Vec3};
use crate::world::WorldState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("no detection of {0:?} above threshold")]
    NotFound(String),
    #[error("detection of {label:?} in camera {camera} has no depth returns")]
    EmptyCloud { label: String, camera: String },
    #[error("mask, depth and camera sizes differ")]
    SizeMismatch,
    #[error("rig config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    #[serde(default)]
    pub cx: Option<f64>,
    #[serde(default)]
    pub cy: Option<f64>,
    /// Either a look-at pair or an explicit camera-to-base pose.
    #[serde(default)]
    pub eye: Option<[f64; 3]>,
    #[serde(default)]
    pub target: Option<[f64; 3]>,
    #[serde(default)]
    pub pose: Option<Pose>,
}

impl CameraSpec {
    pub fn model(&self) -> Result<CameraModel, PerceptionError> {
        let intrinsics = Intrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx.unwrap_or((self.width as f64 - 1.0) * 0.5),
            cy: self.cy.unwrap_or((self.height as f64 - 1.0) * 0.5),
            width: self.width,
            height: self.height,
        };
        if !intrinsics.is_valid() {
            return Err(PerceptionError::Config(format!("camera {}: bad intrinsics", self.id)));
        }
        match (self.eye, self.target, self.pose) {
            (Some(e), Some(t), None) => Ok(CameraModel::look_at(&self.id, intrinsics, Vec3::from(e), Vec3::from(t))),
            (None, None, Some(p)) => Ok(CameraModel {
                id: self.id.clone(),
                intrinsics,
                extrinsics: p.to_isometry(),
            }),
            _ => Err(PerceptionError::Config(format!(
                "camera {}: give either eye and target or pose",
                self.id
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WristSpec {
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    /// Capture height above the tool centroid, meters.
    pub standoff: f64,
}

impl WristSpec {
    pub fn camera_above(&self, point: &Vec3) -> CameraModel {
        CameraModel::overhead(
            "wrist",
            Intrinsics::centered(self.width, self.height, self.focal),
            point + Vec3::new(0.0, 0.0, self.standoff),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigConfig {
    pub cameras: Vec<CameraSpec>,
    pub wrist: WristSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
}

pub const DEFAULT_RIG_TOML: &str = include_str!("../../assets/rig.toml");

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig::from_toml(DEFAULT_RIG_TOML).expect("bundled rig config parses")
    }
}

impl RigConfig {
    pub fn from_toml(text: &str) -> Result<Self, PerceptionError> {
        let rig: RigConfig = toml::from_str(text).map_err(|e| PerceptionError::Config(e.to_string()))?;
        rig.camera_models()?;
        Ok(rig)
    }

    pub fn camera_models(&self) -> Result<Vec<CameraModel>, PerceptionError> {
        self.cameras.iter().map(CameraSpec::model).collect()
    }

    pub fn cage(&self) -> Vec<CameraModel> {
        self.camera_models().expect("validated at load")
    }
}

/// Cage views of one world state; render once, query many times.
#[derive(Debug, Clone)]
pub struct Observation {
    pub views: Vec<View>,
    pub seed: u64,
}

impl Observation {
    pub fn capture(world: &WorldState, rig: &RigConfig, seed: u64) -> Self {
        Observation {
            views: render_views(world, &rig.cage(), &rig.noise, seed),
            seed,
        }
    }

    /// All fused candidates for a query, in canonical order.
    pub fn candidates(&self, rig: &RigConfig, query: &str) -> Vec<FusedObject> {
        let mut clouds = Vec::new();
        for view in &self.views {
            for (j, det) in detect(view, query, &rig.detector, self.seed).iter().enumerate() {
                match deproject(det, &view.depth, &view.camera, j) {
                    Ok(pc) => clouds.push(pc),
                    Err(e) => log::debug!("{e}"),
                }
            }
        }
        fuse(&clouds, &rig.fusion)
    }

    /// The candidate with the highest aggregate logit; the earliest
    /// candidate in canonical order wins ties.
    pub fn query(&self, rig: &RigConfig, query: &str) -> Result<FusedObject, PerceptionError> {
        select_best(self.candidates(rig, query)).ok_or_else(|| PerceptionError::NotFound(query.to_string()))
    }
}

pub fn select_best(candidates: Vec<FusedObject>) -> Option<FusedObject> {
    candidates
        .into_iter()
        .reduce(|best, c| if c.logit > best.logit { c } else { best })
}

/// Render, detect, deproject, fuse, denoise and extract for one query.
pub fn query_object(world: &WorldState, rig: &RigConfig, query: &str, seed: u64) -> Result<FusedObject, PerceptionError> {
    Observation::capture(world, rig, seed).query(rig, query)
}
