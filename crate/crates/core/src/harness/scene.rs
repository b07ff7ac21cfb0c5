//! Randomized table-top scenes for experiment trials.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::fixtures;
use crate::geometry::Pose;
use crate::world::shape::Composite;
use crate::world::{SceneObject, WorldState};

/// Centroid sampling box on the table, meters.
pub const X_RANGE: (f64, f64) = (0.43, 0.67);
pub const Y_RANGE: (f64, f64) = (-0.17, 0.17);
/// Minimum horizontal gap between object bounding boxes.
pub const MIN_GAP_M: f64 = 0.03;
pub const HOME: [f64; 3] = [0.3, 0.0, 0.4];

/// Labels a distractor may take. Verb tools and containers that would change
/// the plan are left out.
const DISTRACTORS: [&str; 5] = ["tomato", "apple", "block", "hammer", "plate"];
const PLACE_ATTEMPTS: usize = 200;
const LAYOUT_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub world: WorldState,
    /// Role name to object name.
    pub roles: BTreeMap<String, String>,
    pub relevant: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("could not place {0} without overlap")]
pub struct PlacementError(pub String);

/// One role to fill: a role name and the labels it may take.
#[derive(Debug, Clone, Copy)]
pub struct Slot {
    pub role: &'static str,
    pub labels: &'static [&'static str],
    pub relevant: bool,
}

impl Slot {
    pub const fn relevant(role: &'static str, labels: &'static [&'static str]) -> Self {
        Slot {
            role,
            labels,
            relevant: true,
        }
    }

    pub const fn extra(role: &'static str, labels: &'static [&'static str]) -> Self {
        Slot {
            role,
            labels,
            relevant: false,
        }
    }
}

fn gap(a: &SceneObject, b: &SceneObject) -> f64 {
    let (p, q) = (a.world_aabb(), b.world_aabb());
    let dx = (q.min.x - p.max.x).max(p.min.x - q.max.x);
    let dy = (q.min.y - p.max.y).max(p.min.y - q.max.y);
    dx.max(dy)
}

fn place(rng: &mut ChaCha8Rng, label: &str, placed: &[SceneObject]) -> Result<SceneObject, PlacementError> {
    for _ in 0..PLACE_ATTEMPTS {
        let xy = [rng.random_range(X_RANGE.0..=X_RANGE.1), rng.random_range(Y_RANGE.0..=Y_RANGE.1)];
        let yaw = rng.random_range(-180.0..180.0_f64).round();
        let o = fixtures::by_label(label, label, xy, yaw).ok_or_else(|| PlacementError(label.to_string()))?;
        if placed.iter().all(|p| gap(p, &o) >= MIN_GAP_M) {
            return Ok(o);
        }
    }
    Err(PlacementError(label.to_string()))
}

/// Place every label, starting over when one does not fit.
fn layout(rng: &mut ChaCha8Rng, labels: &[&str]) -> Result<Vec<SceneObject>, PlacementError> {
    let mut last = PlacementError(String::new());
    for _ in 0..LAYOUT_ATTEMPTS {
        let mut objects = Vec::new();
        for l in labels {
            match place(rng, l, &objects) {
                Ok(o) => objects.push(o),
                Err(e) => {
                    last = e;
                    break;
                }
            }
        }
        if objects.len() == labels.len() {
            return Ok(objects);
        }
    }
    Err(last)
}

/// Fill `slots` in order, then add `distractors` objects whose labels are not
/// already in the scene. Larger objects go down first.
pub fn generate(
    rng: &mut ChaCha8Rng,
    slots: &[Slot],
    distractors: usize,
) -> Result<GeneratedScene, PlacementError> {
    let mut roles = BTreeMap::new();
    let mut relevant = Vec::new();
    let mut labels: Vec<&str> = Vec::new();
    for s in slots {
        let l = *s.labels.choose(rng).expect("slot has labels");
        roles.insert(s.role.to_string(), l.to_string());
        if s.relevant {
            relevant.push(l.to_string());
        }
        labels.push(l);
    }
    let pool: Vec<&str> = DISTRACTORS.iter().copied().filter(|d| !labels.contains(d)).collect();
    labels.extend(pool.choose_multiple(rng, distractors));

    let mut order = labels.clone();
    let size = |l: &str| fixtures::by_label(l, l, [0.0; 2], 0.0).map_or(0.0, |o| o.footprint_radius());
    order.sort_by(|a, b| size(b).total_cmp(&size(a)));
    let mut objects = layout(rng, &order)?;
    // Scene order follows role order so comprehension output is stable.
    objects.sort_by_key(|o| labels.iter().position(|l| *l == o.name));
    let mut world = WorldState::empty(0.0, Pose::new(HOME, [0.0; 3]));
    world.objects = objects;
    relevant.sort();
    Ok(GeneratedScene { world, roles, relevant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream;

    const SLOTS: [Slot; 3] = [
        Slot::relevant("tool", &["scoop"]),
        Slot::relevant("target", &["candy"]),
        Slot::extra("distractor", &["spatula"]),
    ];

    #[test]
    fn generation_is_seeded() {
        let a = generate(&mut stream(3, &["t"]), &SLOTS, 1).unwrap();
        let b = generate(&mut stream(3, &["t"]), &SLOTS, 1).unwrap();
        let c = generate(&mut stream(4, &["t"]), &SLOTS, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.world, c.world);
        assert_eq!(a.relevant, ["candy", "scoop"]);
        assert_eq!(a.world.objects.len(), 4);
        assert_eq!(a.world.objects[0].name, "scoop");
    }

    #[test]
    fn objects_keep_their_distance() {
        for seed in 0..40 {
            let s = generate(&mut stream(seed, &["gap"]), &SLOTS, 2).unwrap();
            let o = &s.world.objects;
            for i in 0..o.len() {
                let c = o[i].pose.translation();
                assert!((X_RANGE.0..=X_RANGE.1).contains(&c.x) && (Y_RANGE.0..=Y_RANGE.1).contains(&c.y));
                for j in i + 1..o.len() {
                    assert!(gap(&o[i], &o[j]) >= MIN_GAP_M, "seed {seed}: {} {}", o[i].name, o[j].name);
                }
            }
        }
    }
}
