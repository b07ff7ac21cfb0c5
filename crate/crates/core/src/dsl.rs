//! The low-level gripper command language.
//!
//! Three templates, one command per line:
//!
//! ```text
//! Go-to: original position of table + (0, 0, 2) cm
//! Grasp: 0
//! Tilt:(0, 30, 0)
//! ```
//!
//! Go-to deltas are centimeters; Tilt angles are absolute roll-pitch-yaw in
//! degrees.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::{LocationExpr, PlanError};

/// Default bound on any Go-to delta component, centimeters.
pub const DEFAULT_WORKSPACE_BOUND_CM: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error("unknown command head in {0:?}")]
    UnknownHead(String),
    #[error("malformed tuple: {0}")]
    Tuple(String),
    #[error("grasp value must be 0 or 1, got {0:?}")]
    GraspValue(String),
    #[error("bad location: {0}")]
    Location(#[from] PlanError),
    #[error("unexpected trailing text {0:?}")]
    Trailing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gripper {
    Open,
    Close,
}

impl Gripper {
    pub fn bit(self) -> u8 {
        match self {
            Gripper::Open => 0,
            Gripper::Close => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LowLevelAction {
    GoTo {
        location: LocationExpr,
        delta_cm: [f64; 3],
    },
    Grasp(Gripper),
    Tilt {
        angles_deg: [f64; 3],
    },
}

impl LowLevelAction {
    pub fn goto(location: LocationExpr, delta_cm: [f64; 3]) -> Self {
        LowLevelAction::GoTo { location, delta_cm }
    }

    pub fn tilt(angles_deg: [f64; 3]) -> Self {
        LowLevelAction::Tilt { angles_deg }
    }

    pub fn is_goto(&self) -> bool {
        matches!(self, LowLevelAction::GoTo { .. })
    }
}

impl fmt::Display for LowLevelAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LowLevelAction::GoTo { location, delta_cm: [x, y, z] } => {
                write!(f, "Go-to: {location} + ({x}, {y}, {z}) cm")
            }
            LowLevelAction::Grasp(g) => write!(f, "Grasp: {}", g.bit()),
            LowLevelAction::Tilt { angles_deg: [a, b, c] } => write!(f, "Tilt:({a}, {b}, {c})"),
        }
    }
}

impl FromStr for LowLevelAction {
    type Err = DslError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

/// Strip `head` and the following colon, allowing spaces before the colon.
fn strip_head<'a>(text: &'a str, head: &str) -> Option<&'a str> {
    let rest = text.strip_prefix(head)?;
    rest.trim_start().strip_prefix(':')
}

fn parse_tuple(text: &str) -> Result<([f64; 3], &str), DslError> {
    let t = text.trim_start();
    let body = t
        .strip_prefix('(')
        .ok_or_else(|| DslError::Tuple(format!("expected '(' in {text:?}")))?;
    let close = body
        .find(')')
        .ok_or_else(|| DslError::Tuple(format!("missing ')' in {text:?}")))?;
    let parts: Vec<&str> = body[..close].split(',').collect();
    if parts.len() != 3 {
        return Err(DslError::Tuple(format!("expected 3 components, found {}", parts.len())));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(&parts) {
        let v: f64 = p
            .trim()
            .parse()
            .map_err(|_| DslError::Tuple(format!("not a number: {:?}", p.trim())))?;
        if !v.is_finite() {
            return Err(DslError::Tuple(format!("non-finite component {:?}", p.trim())));
        }
        *slot = v;
    }
    Ok((out, &body[close + 1..]))
}

pub fn parse_action(text: &str) -> Result<LowLevelAction, DslError> {
    let t = text.trim();
    if let Some(rest) = strip_head(t, "Go-to") {
        let plus = rest
            .match_indices('+')
            .map(|(i, _)| i)
            .find(|&i| rest[i + 1..].trim_start().starts_with('('))
            .ok_or_else(|| DslError::Tuple("missing '+ (dx, dy, dz)'".into()))?;
        let location: LocationExpr = rest[..plus].parse()?;
        let (delta_cm, tail) = parse_tuple(&rest[plus + 1..])?;
        let tail = tail.trim();
        if !(tail.is_empty() || tail == "cm") {
            return Err(DslError::Trailing(tail.to_string()));
        }
        return Ok(LowLevelAction::GoTo { location, delta_cm });
    }
    if let Some(rest) = strip_head(t, "Grasp") {
        return match rest.trim() {
            "0" => Ok(LowLevelAction::Grasp(Gripper::Open)),
            "1" => Ok(LowLevelAction::Grasp(Gripper::Close)),
            other => Err(DslError::GraspValue(other.to_string())),
        };
    }
    if let Some(rest) = strip_head(t, "Tilt") {
        let (angles_deg, tail) = parse_tuple(rest)?;
        if !tail.trim().is_empty() {
            return Err(DslError::Trailing(tail.trim().to_string()));
        }
        return Ok(LowLevelAction::Tilt { angles_deg });
    }
    Err(DslError::UnknownHead(t.to_string()))
}

pub fn serialize_action(action: &LowLevelAction) -> String {
    action.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlagKind {
    /// Close commanded while the gripper is already closed.
    RedundantClose,
    /// Open commanded while the gripper is already open.
    RedundantOpen,
    /// Close commanded before any Go-to in the sequence.
    GraspWithoutApproach,
    /// A Go-to delta component exceeds the workspace bound.
    DeltaOutOfBounds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceFlag {
    pub index: usize,
    pub kind: FlagKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceContext {
    pub holding_object: bool,
    pub workspace_bound_cm: f64,
}

impl SequenceContext {
    pub fn new(holding_object: bool) -> Self {
        SequenceContext {
            holding_object,
            workspace_bound_cm: DEFAULT_WORKSPACE_BOUND_CM,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub flags: Vec<SequenceFlag>,
}

impl SequenceReport {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Purely syntactic redundancy and sanity checks over a command sequence.
pub fn validate_sequence(actions: &[LowLevelAction], ctx: SequenceContext) -> SequenceReport {
    let mut closed = ctx.holding_object;
    let mut seen_goto = false;
    let mut flags = Vec::new();
    for (index, a) in actions.iter().enumerate() {
        match a {
            LowLevelAction::GoTo { delta_cm, .. } => {
                seen_goto = true;
                if delta_cm.iter().any(|d| d.abs() > ctx.workspace_bound_cm) {
                    flags.push(SequenceFlag {
                        index,
                        kind: FlagKind::DeltaOutOfBounds,
                    });
                }
            }
            LowLevelAction::Grasp(Gripper::Close) => {
                if closed {
                    flags.push(SequenceFlag {
                        index,
                        kind: FlagKind::RedundantClose,
                    });
                } else if !seen_goto {
                    flags.push(SequenceFlag {
                        index,
                        kind: FlagKind::GraspWithoutApproach,
                    });
                }
                closed = true;
            }
            LowLevelAction::Grasp(Gripper::Open) => {
                if !closed {
                    flags.push(SequenceFlag {
                        index,
                        kind: FlagKind::RedundantOpen,
                    });
                }
                closed = false;
            }
            LowLevelAction::Tilt { .. } => {}
        }
    }
    SequenceReport { flags }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_place() -> Vec<LowLevelAction> {
        [
            "Go-to: original position of table + (0, 0, 2) cm",
            "Grasp: 0",
            "Go-to: original position of table + (0, 0, 10) cm",
        ]
        .iter()
        .map(|l| parse_action(l).unwrap())
        .collect()
    }

    #[test]
    fn parses_goto_with_cm() {
        assert_eq!(
            parse_action("Go-to: original position of table + (0, 0, 2) cm").unwrap(),
            LowLevelAction::goto(LocationExpr::OriginalOf("table".into()), [0.0, 0.0, 2.0])
        );
    }

    #[test]
    fn parses_grasp_and_tilt() {
        assert_eq!(parse_action("Grasp: 0").unwrap(), LowLevelAction::Grasp(Gripper::Open));
        assert_eq!(parse_action("Grasp:1").unwrap(), LowLevelAction::Grasp(Gripper::Close));
        assert_eq!(parse_action("Tilt:(0, 0, 0)").unwrap(), LowLevelAction::tilt([0.0; 3]));
        assert_eq!(parse_action("  Tilt : ( 0 ,30, -15.5 ) ").unwrap(), LowLevelAction::tilt([0.0, 30.0, -15.5]));
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(
            LowLevelAction::goto(LocationExpr::Home, [0.0, 0.0, 10.0]).to_string(),
            "Go-to: robot home pose + (0, 0, 10) cm"
        );
        assert_eq!(LowLevelAction::Grasp(Gripper::Close).to_string(), "Grasp: 1");
        assert_eq!(LowLevelAction::tilt([0.0, 30.0, 0.0]).to_string(), "Tilt:(0, 30, 0)");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_action("Grasp: 2"), Err(DslError::GraspValue(_))));
        assert!(matches!(parse_action("grasp: 1"), Err(DslError::UnknownHead(_))));
        assert!(matches!(parse_action("Move: home"), Err(DslError::UnknownHead(_))));
        assert!(matches!(parse_action("Tilt:(0, 0)"), Err(DslError::Tuple(_))));
        assert!(matches!(parse_action("Tilt:(0, nan, 0)"), Err(DslError::Tuple(_))));
        assert!(matches!(
            parse_action("Go-to: robot home pose + (0, 0, 1) mm"),
            Err(DslError::Trailing(_))
        ));
    }

    #[test]
    fn redundant_close_is_flagged() {
        let seq = vec![
            LowLevelAction::goto(LocationExpr::Home, [0.0; 3]),
            LowLevelAction::Grasp(Gripper::Close),
            LowLevelAction::Grasp(Gripper::Close),
        ];
        let r = validate_sequence(&seq, SequenceContext::new(false));
        assert_eq!(r.flags, vec![SequenceFlag { index: 2, kind: FlagKind::RedundantClose }]);
    }

    #[test]
    fn bare_double_close_flags_both_problems() {
        let seq = vec![LowLevelAction::Grasp(Gripper::Close), LowLevelAction::Grasp(Gripper::Close)];
        let r = validate_sequence(&seq, SequenceContext::new(false));
        assert_eq!(
            r.flags,
            vec![
                SequenceFlag { index: 0, kind: FlagKind::GraspWithoutApproach },
                SequenceFlag { index: 1, kind: FlagKind::RedundantClose },
            ]
        );
    }

    #[test]
    fn table_place_is_clean_when_holding() {
        assert!(validate_sequence(&table_place(), SequenceContext::new(true)).is_clean());
        let r = validate_sequence(&table_place(), SequenceContext::new(false));
        assert_eq!(r.flags[0].kind, FlagKind::RedundantOpen);
    }

    #[test]
    fn workspace_bound() {
        let seq = vec![LowLevelAction::goto(LocationExpr::Home, [0.0, 0.0, 200.0])];
        let r = validate_sequence(&seq, SequenceContext::new(false));
        assert_eq!(r.flags, vec![SequenceFlag { index: 0, kind: FlagKind::DeltaOutOfBounds }]);
    }
}
