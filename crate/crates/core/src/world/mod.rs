//! Ground-truth table-top world.
//!
//! The world is a value: every operation takes a state and returns a new one.
//! Nothing here simulates contact except the table plane.

mod exec;
mod scene;
pub mod shape;
mod verify;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Pose, Vec3};
use crate::plan::LocationExpr;
use shape::{Composite, Primitive};

pub use exec::{apply_action, apply_command, tool_head_point, Command, Event, ExecError};
pub use scene::{load_scene, save_scene, SceneDocument, SceneError, SCHEMA_VERSION};
pub use verify::{verify_step, VerificationResult, VerificationStatus};

/// Distance from the tcp within which Grasp 1 attaches an object.
pub const GRASP_PROXIMITY_M: f64 = 0.02;
/// Widest object cross-section the jaws can close on.
pub const MAX_JAW_OPENING_M: f64 = 0.08;
/// A held scoop must tilt at least this far after sweeping a granular pile.
pub const SCOOP_TILT_DEG: f64 = 30.0;
/// Tilting a loaded tool this far empties it.
pub const POUR_TILT_DEG: f64 = 75.0;
/// Flattener head must reach this close to the table over the dough.
pub const FLATTEN_TABLE_GAP_M: f64 = 0.01;
/// Horizontal direction reversals inside a container that count as whisking.
pub const WHISK_REVERSALS: u32 = 3;
/// Placement tolerance used by step verification.
pub const PLACE_TOLERANCE_M: f64 = 0.03;
/// Thickness of a container's floor; dropped objects rest on it.
pub const CONTAINER_FLOOR_M: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("unknown object {0:?}")]
    UnknownObject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolClass {
    Scoop,
    Flattener,
    Whisk,
    Hammer,
    Spatula,
    Other,
}

impl ToolClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolClass::Scoop => "scoop",
            ToolClass::Flattener => "flattener",
            ToolClass::Whisk => "whisk",
            ToolClass::Hammer => "hammer",
            ToolClass::Spatula => "spatula",
            ToolClass::Other => "other",
        }
    }

    /// Tools whose tip can poke holes.
    pub fn is_pointed(self) -> bool {
        self == ToolClass::Other
    }
}

/// How the effect rules treat an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    #[default]
    Rigid,
    Granular,
    Dough,
    Container,
}

/// A box in an object's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: [f64; 3],
    pub size: [f64; 3],
}

impl Region {
    pub fn contains_local(&self, p: &Vec3, margin: f64) -> bool {
        (0..3).all(|i| (p[i] - self.center[i]).abs() <= self.size[i] * 0.5 + margin)
    }

    pub fn as_primitive(&self) -> Primitive {
        Primitive::cuboid(self.size, self.center)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub shape: Vec<Primitive>,
    pub pose: Pose,
    pub original_pose: Pose,
    pub is_tool: bool,
    pub tool_class: Option<ToolClass>,
    pub material: Material,
    pub graspable_region: Option<Region>,
}

impl Composite for SceneObject {
    fn primitives(&self) -> &[Primitive] {
        &self.shape
    }
    fn pose(&self) -> &Pose {
        &self.pose
    }
}

impl SceneObject {
    /// Detector label: the name without a trailing `_<digits>` instance suffix.
    pub fn label(&self) -> &str {
        label_of(&self.name)
    }

    /// Primitives outside the graspable region; the whole shape for non-tools.
    pub fn head_primitives(&self) -> Vec<&Primitive> {
        match &self.graspable_region {
            Some(r) => {
                let head: Vec<&Primitive> = self
                    .shape
                    .iter()
                    .filter(|p| !r.contains_local(&p.center(), 1e-9))
                    .collect();
                if head.is_empty() {
                    self.shape.iter().collect()
                } else {
                    head
                }
            }
            None => self.shape.iter().collect(),
        }
    }

    /// Bounding box of the object placed at its original pose.
    pub fn original_aabb(&self) -> Aabb {
        self.shape
            .iter()
            .fold(Aabb::empty(), |acc, p| acc.union(&p.world_aabb(&self.original_pose)))
    }

    /// Horizontal radius of the footprint around the bounding-box center.
    pub fn footprint_radius(&self) -> f64 {
        let e = self.world_aabb().extents();
        0.5 * e.x.max(e.y)
    }
}

pub fn label_of(name: &str) -> &str {
    match name.rsplit_once('_') {
        Some((base, suffix))
            if !base.is_empty() && !suffix.is_empty() && suffix.bytes().all(|b| b.is_ascii_digit()) =>
        {
            base
        }
        _ => name,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub tcp_pose: Pose,
    pub gripper_open: bool,
    pub held_object: Option<String>,
    pub home_pose: Pose,
    /// Held object pose expressed in the tcp frame.
    pub grasp_offset: Option<Pose>,
    /// Whether the grasp point fell inside the held tool's graspable region.
    pub grasp_in_region: bool,
}

impl RobotState {
    pub fn at_home(home_pose: Pose) -> Self {
        RobotState {
            tcp_pose: home_pose,
            gripper_open: true,
            held_object: None,
            home_pose,
            grasp_offset: None,
            grasp_in_region: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectEffects {
    pub flattened: bool,
    pub contains: BTreeSet<String>,
    pub whisked: bool,
    pub holes_poked: u32,
}

/// An object carried by another one (candy in a scoop).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rider {
    pub carrier: String,
    /// Rider pose in the carrier frame.
    pub offset: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiskTracker {
    pub container: String,
    pub last_dir: [f64; 2],
    pub reversals: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub table_height: f64,
    pub objects: Vec<SceneObject>,
    pub robot: RobotState,
    pub effects: BTreeMap<String, ObjectEffects>,
    pub riders: BTreeMap<String, Rider>,
    /// Granular pile the held scoop last swept through.
    pub scoop_armed: Option<String>,
    pub whisk: Option<WhiskTracker>,
}

impl WorldState {
    pub fn empty(table_height: f64, home_pose: Pose) -> Self {
        WorldState {
            table_height,
            objects: Vec::new(),
            robot: RobotState::at_home(home_pose),
            effects: BTreeMap::new(),
            riders: BTreeMap::new(),
            scoop_armed: None,
            whisk: None,
        }
    }

    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn object_mut(&mut self, name: &str) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&SceneObject, WorldError> {
        self.object(name)
            .ok_or_else(|| WorldError::UnknownObject(name.to_string()))
    }

    pub fn effects_of(&self, name: &str) -> ObjectEffects {
        self.effects.get(name).cloned().unwrap_or_default()
    }

    pub fn held(&self) -> Option<&SceneObject> {
        self.robot.held_object.as_deref().and_then(|n| self.object(n))
    }

    /// Ground-truth location of a plan location phrase.
    pub fn resolve_location(&self, loc: &LocationExpr) -> Result<Vec3, WorldError> {
        match loc {
            LocationExpr::Home => Ok(self.robot.home_pose.translation()),
            LocationExpr::OriginalOf(n) => Ok(self.require(n)?.original_pose.translation()),
            LocationExpr::CurrentOf(n) => Ok(self.require(n)?.pose.translation()),
        }
    }

    /// Region a placement is checked against: the referenced object's box at
    /// the requested pose, or the home point.
    pub fn location_region(&self, loc: &LocationExpr) -> Result<Aabb, WorldError> {
        match loc {
            LocationExpr::Home => {
                let p = self.robot.home_pose.translation();
                Ok(Aabb { min: p, max: p })
            }
            LocationExpr::OriginalOf(n) => Ok(self.require(n)?.original_aabb()),
            LocationExpr::CurrentOf(n) => Ok(self.require(n)?.world_aabb()),
        }
    }

    /// Deterministic JSON encoding, used for golden comparisons.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("world state serializes")
    }

    /// Objects resting in or carried by `name`, recursively.
    pub fn carried_by(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut frontier = vec![name.to_string()];
        while let Some(c) = frontier.pop() {
            for (r, rider) in &self.riders {
                if rider.carrier == c && !out.contains(r) {
                    out.push(r.clone());
                    frontier.push(r.clone());
                }
            }
        }
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_strip_instance_suffix() {
        assert_eq!(label_of("tomato_2"), "tomato");
        assert_eq!(label_of("tomato"), "tomato");
        assert_eq!(label_of("cup_a"), "cup_a");
        assert_eq!(label_of("_3"), "_3");
    }
}
