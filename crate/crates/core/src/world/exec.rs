//! Executing gripper commands against the ground-truth world.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::shape::{Composite, Primitive, Solid};
use super::*;
use crate::dsl::{Gripper, LowLevelAction};
use crate::geometry::{arr3, Pose, Vec3};

/// Straight-line motions are checked every this many meters.
const MOTION_STEP_M: f64 = 0.005;
/// Minimum horizontal travel that counts as a whisk stroke.
const WHISK_MIN_STROKE_M: f64 = 0.005;
/// Slack for the graspable-region membership test.
const REGION_MARGIN_M: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("target z {z:.4} m is below the table")]
    BelowTable { z: f64 },
    #[error("grasp commanded while already holding {0:?}")]
    AlreadyHolding(String),
    #[error(transparent)]
    Location(#[from] WorldError),
}

/// Everything the executor can run: a parsed DSL action, or an absolute tcp
/// move used by the grasping route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Command {
    Action(LowLevelAction),
    MoveTcp(Pose),
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Command::Action(a) => write!(f, "{a}"),
            Command::MoveTcp(p) => write!(
                f,
                "Move-tcp: ({}, {}, {}) m, rpy ({}, {}, {})",
                p.position[0], p.position[1], p.position[2], p.rpy[0], p.rpy[1], p.rpy[2]
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Event {
    Moved { tcp: [f64; 3] },
    TableContact,
    Grasped { object: String, in_region: bool },
    ClosedOnNothing,
    TooWide { object: String, extent: f64 },
    RedundantGripper,
    Released { object: String, onto: Option<String> },
    Tilted { magnitude: f64 },
    ScoopArmed { pile: String },
    Scooped { pile: String, tool: String },
    Poured { contents: Vec<String>, onto: Option<String> },
    Flattened { object: String },
    Poked { object: String },
    WhiskStroke { container: String, reversals: u32 },
    Whisked { object: String },
}

pub fn apply_action(
    world: &WorldState,
    action: &LowLevelAction,
) -> Result<(WorldState, Vec<Event>), ExecError> {
    apply_command(world, &Command::Action(action.clone()))
}

pub fn apply_command(
    world: &WorldState,
    command: &Command,
) -> Result<(WorldState, Vec<Event>), ExecError> {
    let mut w = world.clone();
    let mut events = Vec::new();
    match command {
        Command::Action(LowLevelAction::GoTo { location, delta_cm }) => {
            let target = w.resolve_location(location)? + Vec3::from(*delta_cm) / 100.0;
            check_target(&w, &target)?;
            let target_pose = w.robot.tcp_pose.with_position(target);
            translate(&mut w, target_pose, &mut events);
        }
        Command::Action(LowLevelAction::Grasp(Gripper::Close)) => close(&mut w, &mut events)?,
        Command::Action(LowLevelAction::Grasp(Gripper::Open)) => open(&mut w, &mut events),
        Command::Action(LowLevelAction::Tilt { angles_deg }) => tilt(&mut w, *angles_deg, &mut events),
        Command::MoveTcp(pose) => {
            let target = pose.translation();
            check_target(&w, &target)?;
            let mut oriented = w.robot.tcp_pose;
            oriented.rpy = pose.normalized().rpy;
            w.robot.tcp_pose = oriented;
            sync_held(&mut w, &mut events);
            let tcp = w.robot.tcp_pose;
            translate(&mut w, tcp.with_position(target), &mut events);
        }
    }
    Ok((w, events))
}

fn check_target(w: &WorldState, target: &Vec3) -> Result<(), ExecError> {
    if target.z < w.table_height {
        return Err(ExecError::BelowTable { z: target.z });
    }
    Ok(())
}

fn compose(parent: &Pose, child: &Pose) -> Pose {
    Pose::from_isometry(&(parent.to_isometry() * child.to_isometry()))
}

fn relative(parent: &Pose, child: &Pose) -> Pose {
    Pose::from_isometry(&(parent.to_isometry().inverse() * child.to_isometry()))
}

/// Volume-weighted center of a tool's working end, in the world frame.
pub fn tool_head_point(obj: &SceneObject) -> Vec3 {
    let head = obj.head_primitives();
    let total: f64 = head.iter().map(|p| p.volume()).sum();
    let local = head
        .iter()
        .fold(Vec3::zeros(), |acc, p| acc + p.center() * p.volume())
        / total;
    obj.pose.transform_point(&local)
}

fn head_min_z(obj: &SceneObject) -> f64 {
    obj.head_primitives()
        .iter()
        .map(|p| p.world_aabb(&obj.pose).min.z)
        .fold(f64::INFINITY, f64::min)
}

fn xy_dist(a: &Vec3, b: &Vec3) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

fn update_riders(w: &mut WorldState, root: &str) {
    let mut frontier = vec![root.to_string()];
    while let Some(carrier) = frontier.pop() {
        let Some(carrier_pose) = w.object(&carrier).map(|o| o.pose) else {
            continue;
        };
        let riders: Vec<(String, Pose)> = w
            .riders
            .iter()
            .filter(|(_, r)| r.carrier == carrier)
            .map(|(n, r)| (n.clone(), r.offset))
            .collect();
        for (name, offset) in riders {
            if let Some(o) = w.object_mut(&name) {
                o.pose = compose(&carrier_pose, &offset);
            }
            frontier.push(name);
        }
    }
}

/// Move the held object with the tcp and keep it (and anything it carries)
/// above the table by raising the tcp. Returns true on table contact.
fn sync_held(w: &mut WorldState, events: &mut Vec<Event>) -> bool {
    let Some(name) = w.robot.held_object.clone() else {
        return false;
    };
    let offset = w.robot.grasp_offset.expect("held object has a grasp offset");
    let place = |w: &mut WorldState| {
        let tcp = w.robot.tcp_pose;
        if let Some(o) = w.object_mut(&name) {
            o.pose = compose(&tcp, &offset);
        }
        update_riders(w, &name);
    };
    place(w);
    let mut group = w.carried_by(&name);
    group.push(name.clone());
    let lowest = group
        .iter()
        .filter_map(|n| w.object(n))
        .map(|o| o.world_aabb().min.z)
        .fold(f64::INFINITY, f64::min);
    if lowest < w.table_height {
        let lift = w.table_height - lowest;
        w.robot.tcp_pose.position[2] += lift;
        place(w);
        if !events.contains(&Event::TableContact) {
            events.push(Event::TableContact);
        }
        return true;
    }
    false
}

fn translate(w: &mut WorldState, target: Pose, events: &mut Vec<Event>) {
    let start = w.robot.tcp_pose.translation();
    let end = target.translation();
    let steps = ((end - start).norm() / MOTION_STEP_M).ceil().max(1.0) as usize;
    let head_start = w.held().map(tool_head_point);
    let descending = end.z < start.z - 1e-9;
    let mut poked: Vec<String> = Vec::new();
    for i in 1..=steps {
        let p = start + (end - start) * (i as f64 / steps as f64);
        w.robot.tcp_pose = target.with_position(p);
        sync_held(w, events);
        sweep_rules(w, descending, &mut poked, events);
    }
    if let (Some(h0), Some(h1)) = (head_start, w.held().map(tool_head_point)) {
        whisk_rule(w, &h0, &h1, events);
    }
    events.push(Event::Moved {
        tcp: w.robot.tcp_pose.position,
    });
}

/// Effect rules evaluated at every sample along a motion.
fn sweep_rules(w: &mut WorldState, descending: bool, poked: &mut Vec<String>, events: &mut Vec<Event>) {
    let Some(tool) = w.held().cloned() else {
        return;
    };
    let Some(class) = tool.tool_class else {
        return;
    };
    let head = tool_head_point(&tool);
    let carried = w.carried_by(&tool.name);
    match class {
        ToolClass::Scoop if w.robot.grasp_in_region => {
            let pile = w
                .objects
                .iter()
                .filter(|o| o.material == Material::Granular && !w.riders.contains_key(&o.name))
                .find(|o| {
                    let bb = o.world_aabb();
                    xy_dist(&head, &bb.center()) <= o.footprint_radius() && head.z <= bb.max.z
                })
                .map(|o| o.name.clone());
            if let Some(pile) = pile {
                if w.scoop_armed.as_deref() != Some(&pile) {
                    events.push(Event::ScoopArmed { pile: pile.clone() });
                    w.scoop_armed = Some(pile);
                }
            }
        }
        ToolClass::Flattener => {
            if head_min_z(&tool) <= w.table_height + FLATTEN_TABLE_GAP_M {
                let targets: Vec<String> = w
                    .objects
                    .iter()
                    .filter(|o| o.material == Material::Dough && !carried.contains(&o.name))
                    .filter(|o| !w.effects_of(&o.name).flattened)
                    .filter(|o| xy_dist(&head, &o.world_aabb().center()) <= o.footprint_radius() + 0.01)
                    .map(|o| o.name.clone())
                    .collect();
                for t in targets {
                    flatten(w, &t);
                    events.push(Event::Flattened { object: t });
                }
            }
        }
        c if c.is_pointed() && descending => {
            let tip = head_min_z(&tool);
            let targets: Vec<String> = w
                .objects
                .iter()
                .filter(|o| o.material == Material::Dough && w.effects_of(&o.name).flattened)
                .filter(|o| !poked.contains(&o.name))
                .filter(|o| {
                    let bb = o.world_aabb();
                    tip <= bb.max.z + 1e-4 && xy_dist(&head, &bb.center()) <= o.footprint_radius()
                })
                .map(|o| o.name.clone())
                .collect();
            for t in targets {
                w.effects.entry(t.clone()).or_default().holes_poked += 1;
                poked.push(t.clone());
                events.push(Event::Poked { object: t });
            }
        }
        _ => {}
    }
}

fn container_at(w: &WorldState, head: &Vec3) -> Option<String> {
    w.objects
        .iter()
        .filter(|o| o.material == Material::Container)
        .find(|o| {
            let bb = o.world_aabb();
            xy_dist(head, &bb.center()) <= o.footprint_radius() && head.z <= bb.max.z + 0.01
        })
        .map(|o| o.name.clone())
}

fn whisk_rule(w: &mut WorldState, h0: &Vec3, h1: &Vec3, events: &mut Vec<Event>) {
    if w.held().and_then(|o| o.tool_class) != Some(ToolClass::Whisk) {
        return;
    }
    let (c0, c1) = (container_at(w, h0), container_at(w, h1));
    let Some(container) = c1.filter(|c| c0.as_deref() == Some(c.as_str())) else {
        if container_at(w, h1).is_none() {
            w.whisk = None;
        }
        return;
    };
    let d = [h1.x - h0.x, h1.y - h0.y];
    if (d[0] * d[0] + d[1] * d[1]).sqrt() < WHISK_MIN_STROKE_M {
        return;
    }
    let mut tracker = match w.whisk.take() {
        Some(t) if t.container == container => t,
        _ => WhiskTracker {
            container: container.clone(),
            last_dir: d,
            reversals: 0,
        },
    };
    if tracker.last_dir[0] * d[0] + tracker.last_dir[1] * d[1] < 0.0 {
        tracker.reversals += 1;
        events.push(Event::WhiskStroke {
            container: container.clone(),
            reversals: tracker.reversals,
        });
    }
    tracker.last_dir = d;
    if tracker.reversals >= WHISK_REVERSALS {
        let fx = w.effects.entry(container.clone()).or_default();
        if !fx.whisked {
            fx.whisked = true;
            events.push(Event::Whisked { object: container });
        }
    }
    w.whisk = Some(tracker);
}

fn flattened_primitive(p: &Primitive) -> Primitive {
    let s = std::f64::consts::SQRT_2;
    let offset = [p.offset[0] * s, p.offset[1] * s, p.offset[2] * 0.5];
    let solid = match p.solid {
        Solid::Sphere { radius } => Solid::Cylinder {
            radius: radius * s,
            height: radius,
            axis: shape::Axis::Z,
        },
        Solid::Cylinder {
            radius,
            height,
            axis: shape::Axis::Z,
        } => Solid::Cylinder {
            radius: radius * s,
            height: height * 0.5,
            axis: shape::Axis::Z,
        },
        _ => {
            let e = p.local_aabb().extents();
            Solid::Box {
                size: [e.x * s, e.y * s, e.z * 0.5],
            }
        }
    };
    Primitive { solid, offset }
}

/// Halve the height and widen the footprint by sqrt(2), keeping the base in place.
fn flatten(w: &mut WorldState, name: &str) {
    let Some(o) = w.object_mut(name) else {
        return;
    };
    let base = o.world_aabb().min.z;
    o.shape = o.shape.iter().map(flattened_primitive).collect();
    let new_base = o.world_aabb().min.z;
    o.pose.position[2] += base - new_base;
    w.effects.entry(name.to_string()).or_default().flattened = true;
}

/// Height an object dropped at `xy` comes to rest on, and what it rests on.
fn support_below(w: &WorldState, xy: &Vec3, exclude: &[String]) -> (f64, Option<String>) {
    let mut best = (w.table_height, None);
    for o in &w.objects {
        if exclude.contains(&o.name) {
            continue;
        }
        let bb = o.world_aabb();
        if !bb.contains_xy(xy, 0.0) {
            continue;
        }
        let surface = if o.material == Material::Container {
            bb.min.z + CONTAINER_FLOOR_M
        } else {
            bb.max.z
        };
        if surface > best.0 {
            best = (surface, Some(o.name.clone()));
        }
    }
    best
}

fn receives_contents(w: &WorldState, name: &str) -> bool {
    w.object(name)
        .is_some_and(|o| matches!(o.material, Material::Container | Material::Dough))
}

fn remove_from_containers(w: &mut WorldState, name: &str) {
    for fx in w.effects.values_mut() {
        fx.contains.remove(name);
    }
}

/// Width of the object's cross-section along the jaw closing direction,
/// measured through the grasp point. Zero when the slice misses the object.
fn jaw_extent(obj: &SceneObject, tcp: &Vec3, dir: &Vec3) -> f64 {
    const STEP: f64 = 0.001;
    let mut probe = *tcp;
    if !obj.contains_world(&probe) {
        let p = obj.closest_point_world(tcp);
        let below = p - Vec3::new(0.0, 0.0, 0.002);
        probe = if obj.contains_world(&below) { below } else { p };
        if !obj.contains_world(&probe) {
            return 0.0;
        }
    }
    let walk = |sign: f64| {
        let mut k = 0;
        while k < 100 && obj.contains_world(&(probe + dir * (sign * STEP * (k + 1) as f64))) {
            k += 1;
        }
        k as f64 * STEP
    };
    walk(1.0) + walk(-1.0) + STEP
}

fn close(w: &mut WorldState, events: &mut Vec<Event>) -> Result<(), ExecError> {
    if let Some(h) = &w.robot.held_object {
        return Err(ExecError::AlreadyHolding(h.clone()));
    }
    if !w.robot.gripper_open {
        events.push(Event::RedundantGripper);
        return Ok(());
    }
    w.robot.gripper_open = false;
    let tcp = w.robot.tcp_pose.translation();
    let mut candidates: Vec<(f64, &SceneObject)> = w
        .objects
        .iter()
        .filter(|o| !w.riders.contains_key(&o.name))
        .map(|o| (o.distance_world(&tcp), o))
        .filter(|(d, _)| *d <= GRASP_PROXIMITY_M)
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.name.cmp(&b.1.name)));
    let Some((_, obj)) = candidates.first() else {
        events.push(Event::ClosedOnNothing);
        return Ok(());
    };
    let closing = w.robot.tcp_pose.rotation() * Vec3::y();
    let extent = jaw_extent(obj, &tcp, &closing);
    if extent > MAX_JAW_OPENING_M + 1e-9 {
        events.push(Event::TooWide {
            object: obj.name.clone(),
            extent,
        });
        events.push(Event::ClosedOnNothing);
        return Ok(());
    }
    let name = obj.name.clone();
    let in_region = obj.graspable_region.is_some_and(|r| {
        r.contains_local(&obj.pose.inverse_transform_point(&tcp), REGION_MARGIN_M)
    });
    let offset = relative(&w.robot.tcp_pose, &obj.pose);
    w.robot.held_object = Some(name.clone());
    w.robot.grasp_offset = Some(offset);
    w.robot.grasp_in_region = in_region;
    w.scoop_armed = None;
    w.whisk = None;
    remove_from_containers(w, &name);
    events.push(Event::Grasped {
        object: name,
        in_region,
    });
    Ok(())
}

fn open(w: &mut WorldState, events: &mut Vec<Event>) {
    if w.robot.gripper_open {
        events.push(Event::RedundantGripper);
        return;
    }
    w.robot.gripper_open = true;
    let Some(name) = w.robot.held_object.take() else {
        return;
    };
    w.robot.grasp_offset = None;
    w.robot.grasp_in_region = false;
    w.scoop_armed = None;
    w.whisk = None;
    let mut exclude = w.carried_by(&name);
    exclude.push(name.clone());
    let bb = w.require(&name).expect("held object exists").world_aabb();
    let (support, onto) = support_below(w, &bb.center(), &exclude);
    if let Some(o) = w.object_mut(&name) {
        o.pose.position[2] += support - bb.min.z;
    }
    update_riders(w, &name);
    if let Some(target) = onto.as_deref().filter(|t| receives_contents(w, t)) {
        w.effects.entry(target.to_string()).or_default().contains.insert(name.clone());
    }
    events.push(Event::Released { object: name, onto });
}

fn tilt(w: &mut WorldState, angles: [f64; 3], events: &mut Vec<Event>) {
    let head_before = w.held().map(tool_head_point);
    w.robot.tcp_pose = Pose::new(w.robot.tcp_pose.position, angles);
    sync_held(w, events);
    let magnitude = w.robot.tcp_pose.tilt_magnitude();
    events.push(Event::Tilted { magnitude });
    let Some(tool) = w.held().cloned() else {
        return;
    };
    if magnitude >= SCOOP_TILT_DEG && tool.tool_class == Some(ToolClass::Scoop) {
        if let Some(pile) = w.scoop_armed.take() {
            load_scoop(w, &tool, &pile);
            events.push(Event::Scooped {
                pile,
                tool: tool.name.clone(),
            });
        }
    }
    if magnitude >= POUR_TILT_DEG {
        let contents: Vec<String> = w
            .riders
            .iter()
            .filter(|(_, r)| r.carrier == tool.name)
            .map(|(n, _)| n.clone())
            .collect();
        if !contents.is_empty() {
            let at = head_before.expect("held tool has a head");
            let onto = pour(w, &tool.name, &contents, &at);
            events.push(Event::Poured { contents, onto });
        }
    }
}

fn load_scoop(w: &mut WorldState, tool: &SceneObject, pile: &str) {
    let head = tool.head_primitives();
    let local_bb = head
        .iter()
        .fold(crate::geometry::Aabb::empty(), |acc, p| acc.union(&p.local_aabb()));
    let pile_half = w
        .object(pile)
        .map(|o| o.world_aabb().extents().z * 0.5)
        .unwrap_or(0.0);
    let c = local_bb.center();
    let local = Vec3::new(c.x, c.y, local_bb.max.z + pile_half);
    let offset = Pose::from_position(arr3(&local));
    remove_from_containers(w, pile);
    let pose = compose(&tool.pose, &offset);
    if let Some(o) = w.object_mut(pile) {
        o.pose = pose;
    }
    w.riders.insert(
        pile.to_string(),
        Rider {
            carrier: tool.name.clone(),
            offset,
        },
    );
    w.effects
        .entry(tool.name.clone())
        .or_default()
        .contains
        .insert(pile.to_string());
}

fn pour(w: &mut WorldState, tool: &str, contents: &[String], at: &Vec3) -> Option<String> {
    let mut exclude = w.carried_by(tool);
    exclude.push(tool.to_string());
    let (support, onto) = support_below(w, at, &exclude);
    let receiver = onto.clone().filter(|t| receives_contents(w, t));
    for name in contents {
        w.riders.remove(name);
        if let Some(fx) = w.effects.get_mut(tool) {
            fx.contains.remove(name);
        }
        if let Some(o) = w.object_mut(name) {
            o.pose = Pose::new([at.x, at.y, 0.0], o.original_pose.rpy);
            let bb = o.world_aabb();
            o.pose.position[2] += support - bb.min.z;
        }
        if let Some(r) = &receiver {
            w.effects.entry(r.clone()).or_default().contains.insert(name.clone());
        }
    }
    onto
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::plan::LocationExpr;

    fn act(w: &WorldState, line: &str) -> (WorldState, Vec<Event>) {
        apply_action(w, &line.parse().unwrap()).unwrap()
    }

    fn run(w: &WorldState, lines: &[&str]) -> WorldState {
        lines.iter().fold(w.clone(), |w, l| act(&w, l).0)
    }

    fn world_with(objects: Vec<SceneObject>) -> WorldState {
        let mut w = WorldState::empty(0.0, Pose::new([0.3, 0.0, 0.4], [0.0; 3]));
        w.objects = objects;
        w
    }

    #[test]
    fn vacuous_grasp_closes_on_nothing() {
        let w = world_with(vec![fixtures::tomato("tomato", [0.5, 0.1])]);
        let (w2, ev) = act(&w, "Grasp: 1");
        assert!(!w2.robot.gripper_open);
        assert_eq!(w2.robot.held_object, None);
        assert!(ev.contains(&Event::ClosedOnNothing));
    }

    #[test]
    fn pick_and_lift_tracks_tcp() {
        let w = world_with(vec![fixtures::tomato("tomato", [0.5, 0.1])]);
        let w = run(
            &w,
            &[
                "Go-to: original position of tomato + (0, 0, 10) cm",
                "Go-to: original position of tomato + (0, 0, 0) cm",
                "Grasp: 1",
                "Go-to: original position of tomato + (0, 0, 10) cm",
            ],
        );
        assert_eq!(w.robot.held_object.as_deref(), Some("tomato"));
        let t = w.object("tomato").unwrap();
        assert!((t.pose.position[2] - 0.12).abs() < 1e-9);
        let loc = w.resolve_location(&LocationExpr::OriginalOf("tomato".into())).unwrap();
        assert_eq!(loc, Vec3::new(0.5, 0.1, 0.02));
    }

    #[test]
    fn hammer_place_on_table_sequence() {
        let table = fixtures::table_slab("table", [0.55, -0.15]);
        let hammer = fixtures::hammer("hammer", [0.45, 0.15], 0.0);
        let mut w = world_with(vec![table, hammer]);
        // hold the hammer by its handle, lifted clear of the table slab
        w.robot.tcp_pose = Pose::new([0.45, 0.15, 0.2], [0.0, 0.0, 0.0]);
        let h = w.object("hammer").unwrap().pose;
        let h = Pose::new([h.position[0], h.position[1], 0.19], h.rpy);
        w.object_mut("hammer").unwrap().pose = h;
        w.robot.gripper_open = false;
        w.robot.held_object = Some("hammer".into());
        w.robot.grasp_offset = Some(relative(&w.robot.tcp_pose, &h));
        let w = run(
            &w,
            &[
                "Go-to: original position of table + (0, 0, 2) cm",
                "Grasp: 0",
                "Go-to: original position of table + (0, 0, 10) cm",
            ],
        );
        assert_eq!(w.robot.held_object, None);
        let table_bb = w.object("table").unwrap().world_aabb();
        let hb = w.object("hammer").unwrap().world_aabb();
        assert!((hb.min.z - table_bb.max.z).abs() < 1e-9, "hammer rests on the slab");
        assert!(table_bb.contains_xy(&hb.center(), 0.0));
    }

    #[test]
    fn goto_below_table_is_an_error() {
        let w = world_with(vec![fixtures::tomato("tomato", [0.5, 0.1])]);
        let e = apply_action(&w, &"Go-to: original position of tomato + (0, 0, -5) cm".parse().unwrap());
        assert!(matches!(e, Err(ExecError::BelowTable { .. })));
    }

    #[test]
    fn grasp_while_holding_is_an_error() {
        let w = world_with(vec![fixtures::tomato("tomato", [0.5, 0.1])]);
        let w = run(&w, &["Go-to: original position of tomato + (0, 0, 0) cm", "Grasp: 1"]);
        let e = apply_action(&w, &"Grasp: 1".parse().unwrap());
        assert_eq!(e, Err(ExecError::AlreadyHolding("tomato".into())));
    }

    #[test]
    fn release_into_container_records_contents() {
        let w = world_with(vec![
            fixtures::tomato("tomato", [0.5, 0.1]),
            fixtures::bowl("bowl", [0.5, -0.1]),
        ]);
        let w = run(
            &w,
            &[
                "Go-to: original position of tomato + (0, 0, 0) cm",
                "Grasp: 1",
                "Go-to: current position of bowl + (0, 0, 8) cm",
                "Grasp: 0",
            ],
        );
        assert!(w.effects_of("bowl").contains.contains("tomato"));
        let t = w.object("tomato").unwrap().world_aabb();
        let b = w.object("bowl").unwrap().world_aabb();
        assert!((t.min.z - (b.min.z + CONTAINER_FLOOR_M)).abs() < 1e-9);
    }

    #[test]
    fn flattener_pressed_through_dough() {
        let w = world_with(vec![
            fixtures::flattener("flattener", [0.45, 0.15], 0.0),
            fixtures::dough("dough", [0.55, -0.05]),
        ]);
        let grip = w.object("flattener").unwrap().graspable_region.unwrap();
        let top = w.object("flattener").unwrap().pose.transform_point(&Vec3::new(
            grip.center[0],
            grip.center[1],
            grip.center[2] + grip.size[2] * 0.5,
        ));
        let (w, _) = apply_command(&w, &Command::MoveTcp(Pose::from_position(arr3(&top)))).unwrap();
        let w = run(
            &w,
            &[
                "Grasp: 1",
                "Go-to: current position of dough + (0, 0, 15) cm",
                "Go-to: current position of dough + (0, 0, 0) cm",
            ],
        );
        assert!(w.robot.grasp_in_region);
        assert!(w.effects_of("dough").flattened);
        let d = w.object("dough").unwrap().world_aabb();
        assert!((d.extents().z - 0.025).abs() < 1e-9);
        assert!((d.min.z).abs() < 1e-9);
    }
}
