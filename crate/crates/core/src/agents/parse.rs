//! Strict parsers for agent responses and the geometry digest format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dsl::{parse_action, LowLevelAction};
use crate::geometry::Vec3;
use crate::plan::{parse_plan, HighLevelStep, ObjectEntry};

/// Comprehension: `name: tool` or `name: not tool` per line, optional `- `
/// bullet. Names may not repeat.
pub fn parse_object_list(text: &str) -> Result<Vec<ObjectEntry>, String> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let line = line.strip_prefix("- ").unwrap_or(line).trim();
        let (name, kind) = line
            .rsplit_once(':')
            .ok_or_else(|| format!("line {}: expected `name: tool` or `name: not tool`, got {raw:?}", i + 1))?;
        let name = name.trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(format!("line {}: bad object name {name:?}", i + 1));
        }
        let is_tool = match kind.trim() {
            "tool" => true,
            "not tool" => false,
            other => return Err(format!("line {}: expected `tool` or `not tool`, got {other:?}", i + 1)),
        };
        if !seen.insert(name.to_string()) {
            return Err(format!("line {}: duplicate object {name:?}", i + 1));
        }
        out.push(ObjectEntry::new(name, is_tool));
    }
    Ok(out)
}

pub fn format_object_list(objects: &[ObjectEntry]) -> String {
    objects
        .iter()
        .map(|e| format!("{}: {}\n", e.name, if e.is_tool { "tool" } else { "not tool" }))
        .collect()
}

pub fn parse_plan_response(text: &str) -> Result<Vec<HighLevelStep>, String> {
    parse_plan(text).map_err(|e| e.to_string())
}

static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d+[.)]\s*").expect("valid regex"));

/// Step planner: one command per non-blank line, optionally numbered `N.`.
pub fn parse_action_list(text: &str) -> Result<Vec<LowLevelAction>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let body = NUMBERED.replace(l.trim(), "");
            parse_action(&body).map_err(|e| format!("line {}: {e}", i + 1))
        })
        .collect()
}

pub fn format_action_list(actions: &[LowLevelAction]) -> String {
    actions
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {a}\n", i + 1))
        .collect()
}

/// Tool mapper: exactly one token drawn from `db`, or `none`.
pub fn parse_mapping(text: &str, db: &[String]) -> Result<Option<String>, String> {
    let t = text.trim().trim_end_matches('.').trim_matches('`');
    if t.is_empty() || t.contains(char::is_whitespace) {
        return Err(format!("expected a single tool name, got {text:?}"));
    }
    if t.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    Ok(db.iter().find(|n| n.as_str() == t).cloned())
}

/// Perceived box of one object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectGeometry {
    pub centroid: [f64; 3],
    pub dims: [f64; 3],
}

impl ObjectGeometry {
    pub fn new(centroid: Vec3, dims: Vec3) -> Self {
        ObjectGeometry {
            centroid: centroid.into(),
            dims: dims.into(),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        Vec3::from(self.centroid)
    }

    pub fn dims(&self) -> Vec3 {
        Vec3::from(self.dims)
    }

    pub fn bottom(&self) -> f64 {
        self.centroid[2] - 0.5 * self.dims[2]
    }

    pub fn top(&self) -> f64 {
        self.centroid[2] + 0.5 * self.dims[2]
    }
}

/// Proprioceptive gripper state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub position: [f64; 3],
    pub yaw_deg: f64,
    pub closed: bool,
}

/// What the step planner is told about the scene. Entries are keyed by
/// object name (current position) or by a location phrase such as
/// `original position of tomato`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryDigest {
    pub gripper: GripperState,
    pub entries: BTreeMap<String, ObjectGeometry>,
}

fn triple(v: &[f64; 3]) -> String {
    format!("({:.4}, {:.4}, {:.4})", v[0], v[1], v[2])
}

impl fmt::Display for GeometryDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.gripper;
        writeln!(
            f,
            "gripper: position {} m, yaw {:.2} deg, {}",
            triple(&g.position),
            g.yaw_deg,
            if g.closed { "closed" } else { "open" }
        )?;
        for (k, e) in &self.entries {
            writeln!(f, "{k}: centroid {} m, dims {} m", triple(&e.centroid), triple(&e.dims))?;
        }
        Ok(())
    }
}

static GRIPPER_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^gripper: position \(([^)]*)\) m, yaw (\S+) deg, (open|closed)$").expect("valid regex")
});
static ENTRY_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(.+): centroid \(([^)]*)\) m, dims \(([^)]*)\) m$").expect("valid regex"));

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: {p:?}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 3 numbers, got {}", v.len()))
}

impl std::str::FromStr for GeometryDigest {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut gripper = None;
        let mut entries = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(c) = GRIPPER_LINE.captures(line) {
                gripper = Some(GripperState {
                    position: parse_triple(&c[1])?,
                    yaw_deg: c[2].parse().map_err(|_| format!("bad yaw {:?}", &c[2]))?,
                    closed: &c[3] == "closed",
                });
            } else if let Some(c) = ENTRY_LINE.captures(line) {
                entries.insert(
                    c[1].to_string(),
                    ObjectGeometry {
                        centroid: parse_triple(&c[2])?,
                        dims: parse_triple(&c[3])?,
                    },
                );
            } else {
                return Err(format!("unrecognized geometry line {line:?}"));
            }
        }
        Ok(GeometryDigest {
            gripper: gripper.ok_or("no gripper line")?,
            entries,
        })
    }
}
