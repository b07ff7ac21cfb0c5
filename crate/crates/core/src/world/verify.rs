//! Per-step postcondition checks.

use serde::{Deserialize, Serialize};

use super::shape::Composite;
use super::{WorldState, PLACE_TOLERANCE_M};
use crate::plan::HighLevelStep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerificationStatus {
    Pass,
    Fail,
    /// The verb has no known postcondition.
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub status: VerificationStatus,
    pub reason: String,
}

impl VerificationResult {
    fn pass(reason: impl Into<String>) -> Self {
        VerificationResult {
            status: VerificationStatus::Pass,
            reason: reason.into(),
        }
    }

    fn fail(reason: impl Into<String>) -> Self {
        VerificationResult {
            status: VerificationStatus::Fail,
            reason: reason.into(),
        }
    }

    fn check(ok: bool, yes: &str, no: &str) -> Self {
        if ok {
            Self::pass(yes)
        } else {
            Self::fail(no)
        }
    }

    pub fn passed(&self) -> bool {
        self.status == VerificationStatus::Pass
    }
}

const NOT_ACHIEVED: &str = "effect not achieved";

pub fn verify_step(before: &WorldState, after: &WorldState, step: &HighLevelStep) -> VerificationResult {
    let object = step.object.as_deref();
    match step.action.as_str() {
        "pickup" => {
            let Some(obj) = object else {
                return VerificationResult::fail("pickup names no object");
            };
            VerificationResult::check(
                after.robot.held_object.as_deref() == Some(obj),
                "held",
                &format!("{obj} is not held"),
            )
        }
        "place" => verify_place(before, after, step),
        "scoop" => {
            let (Some(obj), Some(tool)) = (object, step.tool.as_deref()) else {
                return VerificationResult::fail("scoop needs an object and a tool");
            };
            VerificationResult::check(after.effects_of(tool).contains.contains(obj), "scooped", NOT_ACHIEVED)
        }
        "flatten" => {
            let Some(obj) = object else {
                return VerificationResult::fail("flatten names no object");
            };
            VerificationResult::check(after.effects_of(obj).flattened, "flattened", NOT_ACHIEVED)
        }
        "whisk" => {
            let Some(obj) = object else {
                return VerificationResult::fail("whisk names no object");
            };
            VerificationResult::check(after.effects_of(obj).whisked, "whisked", NOT_ACHIEVED)
        }
        "poke" => {
            let Some(obj) = object else {
                return VerificationResult::fail("poke names no object");
            };
            VerificationResult::check(
                after.effects_of(obj).holes_poked > before.effects_of(obj).holes_poked,
                "poked",
                NOT_ACHIEVED,
            )
        }
        "pour" => {
            let Some(obj) = object else {
                return VerificationResult::fail("pour names no receiver");
            };
            let was = before.effects_of(obj).contains;
            let now = after.effects_of(obj).contains;
            let tool_empty = step
                .tool
                .as_deref()
                .is_none_or(|t| after.effects_of(t).contains.is_empty());
            VerificationResult::check(now.len() > was.len() && tool_empty, "poured", NOT_ACHIEVED)
        }
        other => VerificationResult {
            status: VerificationStatus::Unverifiable,
            reason: format!("no postcondition for action {other:?}"),
        },
    }
}

/// The placed item is whatever the gripper held before the step, falling
/// back to the tool slot and then the object slot.
fn verify_place(before: &WorldState, after: &WorldState, step: &HighLevelStep) -> VerificationResult {
    let placed = before
        .robot
        .held_object
        .clone()
        .or_else(|| step.tool.clone())
        .or_else(|| step.object.clone());
    let Some(placed) = placed else {
        return VerificationResult::fail("place names nothing to place");
    };
    if after.robot.held_object.as_deref() == Some(placed.as_str()) {
        return VerificationResult::fail(format!("{placed} is still held"));
    }
    let Some(obj) = after.object(&placed) else {
        return VerificationResult::fail(format!("unknown object {placed}"));
    };
    let region = match after.location_region(&step.location) {
        Ok(r) => r,
        Err(e) => return VerificationResult::fail(e.to_string()),
    };
    let d = region.distance(&obj.world_aabb().center());
    VerificationResult::check(
        d <= PLACE_TOLERANCE_M + 1e-9,
        &format!("{placed} within {:.3} m of target", d),
        &format!("{placed} is {:.3} m from target", d),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::Pose;
    use crate::plan::parse_step;

    fn world() -> WorldState {
        let mut w = WorldState::empty(0.0, Pose::new([0.3, 0.0, 0.4], [0.0; 3]));
        w.objects = vec![
            fixtures::tomato("tomato", [0.5, 0.1]),
            fixtures::plate("plate", [0.5, -0.1]),
            fixtures::dough("dough", [0.6, 0.0]),
        ];
        w
    }

    #[test]
    fn pickup_passes_when_held() {
        let before = world();
        let mut after = before.clone();
        after.robot.held_object = Some("tomato".into());
        after.robot.gripper_open = false;
        let step = parse_step("['pickup', 'original position of tomato', 'tomato', 'none']").unwrap();
        assert!(verify_step(&before, &after, &step).passed());
        assert!(!verify_step(&before, &before, &step).passed());
    }

    #[test]
    fn flatten_not_achieved() {
        let w = world();
        let step = parse_step("['flatten', 'current position of dough', 'dough', 'flattener']").unwrap();
        let r = verify_step(&w, &w, &step);
        assert_eq!(r.status, VerificationStatus::Fail);
        assert_eq!(r.reason, "effect not achieved");
    }

    #[test]
    fn place_two_cm_from_plate_passes() {
        let before = world();
        let mut after = before.clone();
        let plate = after.object("plate").unwrap().original_aabb();
        // tomato center 2 cm beyond the plate rim along +x
        let x = plate.max.x + 0.02;
        let t = after.object_mut("tomato").unwrap();
        t.pose.position = [x, plate.center().y, plate.max.z];
        let d = plate.distance(&after.object("tomato").unwrap().world_aabb().center());
        assert!((d - 0.02).abs() < 1e-9);
        let step = parse_step("['place', 'original position of plate', 'plate', 'none']").unwrap();
        let mut b = before.clone();
        b.robot.held_object = Some("tomato".into());
        assert!(verify_step(&b, &after, &step).passed());

        let t = after.object_mut("tomato").unwrap();
        t.pose.position[0] = plate.max.x + 0.05;
        assert!(!verify_step(&b, &after, &step).passed());
    }

    #[test]
    fn unknown_verb_is_unverifiable() {
        let w = world();
        let step = parse_step("['juggle', 'robot home pose', 'tomato', 'none']").unwrap();
        assert_eq!(verify_step(&w, &w, &step).status, VerificationStatus::Unverifiable);
    }
}
