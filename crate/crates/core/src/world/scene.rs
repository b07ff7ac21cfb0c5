//! TOML scene documents.
//!
//! ```toml
//! schema_version = 1
//! table_height = 0.0
//!
//! [[objects]]
//! name = "tomato"
//! pose = { position = [0.5, 0.1, 0.02] }
//! shape = [{ type = "sphere", radius = 0.02 }]
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::shape::{Composite, Solid};
use super::{Material, Region, RobotState, SceneObject, ToolClass, WorldState};
use crate::geometry::Pose;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("duplicate object name {0:?}")]
    Duplicate(String),
    #[error("object {object:?}: non-positive dimension in {field}")]
    NonPositive { object: String, field: String },
    #[error("object {0:?}: is_tool must be set exactly when graspable_region is present")]
    ToolRegion(String),
    #[error("object {0:?}: has no shape")]
    EmptyShape(String),
    #[error("object {0:?}: extends below the table")]
    BelowTable(String),
}

fn default_home() -> Pose {
    Pose::new([0.3, 0.0, 0.4], [0.0, 0.0, 0.0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub name: String,
    pub pose: Pose,
    #[serde(default)]
    pub is_tool: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_class: Option<ToolClass>,
    #[serde(default)]
    pub material: Material,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graspable_region: Option<Region>,
    pub shape: Vec<super::shape::Primitive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub schema_version: u32,
    #[serde(default)]
    pub table_height: f64,
    #[serde(default = "default_home")]
    pub home_pose: Pose,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn check_object(spec: &ObjectSpec, table: f64) -> Result<(), SceneError> {
    if spec.shape.is_empty() {
        return Err(SceneError::EmptyShape(spec.name.clone()));
    }
    for (i, p) in spec.shape.iter().enumerate() {
        if p.dimensions().iter().any(|d| !(*d > 0.0)) {
            let kind = match p.solid {
                Solid::Box { .. } => "box",
                Solid::Cylinder { .. } => "cylinder",
                Solid::Sphere { .. } => "sphere",
            };
            return Err(SceneError::NonPositive {
                object: spec.name.clone(),
                field: format!("shape[{i}] ({kind})"),
            });
        }
    }
    if let Some(r) = &spec.graspable_region {
        if r.size.iter().any(|d| !(*d > 0.0)) {
            return Err(SceneError::NonPositive {
                object: spec.name.clone(),
                field: "graspable_region.size".into(),
            });
        }
    }
    if spec.is_tool != spec.graspable_region.is_some() {
        return Err(SceneError::ToolRegion(spec.name.clone()));
    }
    let obj = to_object(spec.clone());
    if obj.world_aabb().min.z < table - 1e-6 {
        return Err(SceneError::BelowTable(spec.name.clone()));
    }
    Ok(())
}

fn to_object(spec: ObjectSpec) -> SceneObject {
    let pose = spec.pose.normalized();
    SceneObject {
        name: spec.name,
        shape: spec.shape,
        pose,
        original_pose: pose,
        is_tool: spec.is_tool,
        tool_class: spec.tool_class,
        material: spec.material,
        graspable_region: spec.graspable_region,
    }
}

impl SceneDocument {
    pub fn into_world(self) -> Result<WorldState, SceneError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SceneError::Version(self.schema_version));
        }
        let mut names = BTreeSet::new();
        for o in &self.objects {
            if !names.insert(o.name.clone()) {
                return Err(SceneError::Duplicate(o.name.clone()));
            }
            check_object(o, self.table_height)?;
        }
        let mut world = WorldState::empty(self.table_height, self.home_pose.normalized());
        world.robot = RobotState::at_home(world.robot.home_pose);
        world.objects = self.objects.into_iter().map(to_object).collect();
        Ok(world)
    }

    pub fn from_world(world: &WorldState) -> Self {
        SceneDocument {
            schema_version: SCHEMA_VERSION,
            table_height: world.table_height,
            home_pose: world.robot.home_pose,
            objects: world
                .objects
                .iter()
                .map(|o| ObjectSpec {
                    name: o.name.clone(),
                    pose: o.pose,
                    is_tool: o.is_tool,
                    tool_class: o.tool_class,
                    material: o.material,
                    graspable_region: o.graspable_region,
                    shape: o.shape.clone(),
                })
                .collect(),
        }
    }
}

/// Parse a scene document. Every object's original pose is its loaded pose
/// and the robot starts at home with an open, empty gripper.
pub fn load_scene(text: &str) -> Result<WorldState, SceneError> {
    let doc: SceneDocument = toml::from_str(text).map_err(|e| SceneError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    doc.into_world()
}

/// Serialize the world's current object layout as a scene document.
pub fn save_scene(world: &WorldState) -> String {
    toml::to_string(&SceneDocument::from_world(world)).expect("scene serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOMATO: &str = r#"
schema_version = 1
table_height = 0.0

[[objects]]
name = "tomato"
pose = { position = [0.5, 0.1, 0.02] }
shape = [{ type = "sphere", radius = 0.02 }]
"#;

    #[test]
    fn empty_scene_has_only_robot() {
        let w = load_scene("schema_version = 1\n").unwrap();
        assert!(w.objects.is_empty());
        assert!(w.robot.gripper_open);
        assert_eq!(w.robot.held_object, None);
        assert_eq!(w.robot.tcp_pose, w.robot.home_pose);
    }

    #[test]
    fn original_pose_recorded_at_load() {
        let w = load_scene(TOMATO).unwrap();
        assert_eq!(w.objects[0].original_pose.position, [0.5, 0.1, 0.02]);
        assert_eq!(w.objects[0].pose, w.objects[0].original_pose);
    }

    #[test]
    fn parse_error_carries_line() {
        let bad = TOMATO.replace("radius = 0.02", "radius = ");
        match load_scene(&bad) {
            Err(SceneError::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = TOMATO.replace("name = \"tomato\"", "name = \"tomato\"\ncolour = \"red\"");
        assert!(matches!(load_scene(&bad), Err(SceneError::Parse { .. })));
    }

    #[test]
    fn duplicate_and_non_positive() {
        let dup = format!("{TOMATO}{}", &TOMATO[TOMATO.find("[[objects]]").unwrap()..]);
        assert_eq!(load_scene(&dup), Err(SceneError::Duplicate("tomato".into())));
        let neg = TOMATO.replace("radius = 0.02", "radius = -0.02");
        assert!(matches!(load_scene(&neg), Err(SceneError::NonPositive { .. })));
        let zero = TOMATO.replace("radius = 0.02", "radius = 0.0");
        assert!(matches!(load_scene(&zero), Err(SceneError::NonPositive { .. })));
    }

    #[test]
    fn tool_flag_requires_region() {
        let bad = TOMATO.replace("name = \"tomato\"", "name = \"tomato\"\nis_tool = true");
        assert_eq!(load_scene(&bad), Err(SceneError::ToolRegion("tomato".into())));
    }

    #[test]
    fn below_table_rejected() {
        let bad = TOMATO.replace("0.02] }", "0.0] }");
        assert_eq!(load_scene(&bad), Err(SceneError::BelowTable("tomato".into())));
    }

    #[test]
    fn wrong_version() {
        assert_eq!(load_scene("schema_version = 7\n"), Err(SceneError::Version(7)));
    }
}
