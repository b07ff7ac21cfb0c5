//! Rule-based responses for the toy-kitchen task family, used as the
//! scripted backend's fallback. Reads only the bound prompt variables.

use std::collections::BTreeMap;

use crate::dsl::{Gripper, LowLevelAction};
use crate::geometry::Vec3;
use crate::plan::{parse_step, HighLevelStep, LocationExpr, ObjectEntry};
use crate::world::label_of;

use super::backend::Role;
use super::parse::{format_action_list, parse_object_list, GeometryDigest, ObjectGeometry};

/// Labels the policy treats as tools.
pub const TOOL_LABELS: [&str; 12] = [
    "scoop", "spatula", "whisk", "hammer", "flattener", "skewer", "knife", "ladle", "spoon", "roller", "press",
    "fork",
];

/// Verbs and the tool labels that can do them, in order of preference.
const VERB_TOOLS: [(&str, &[&str]); 4] = [
    ("scoop", &["scoop", "ladle", "spoon"]),
    ("flatten", &["flattener", "roller", "press"]),
    ("whisk", &["whisk", "fork"]),
    ("poke", &["skewer", "fork", "knife"]),
];

/// Distance from the perceived centroid to the working end, as a fraction
/// of half the tool's longest horizontal side.
fn head_fraction(label: &str) -> f64 {
    match label {
        "scoop" | "ladle" | "spoon" => 0.35,
        "whisk" => 0.33,
        "spatula" => 0.36,
        "hammer" => 0.45,
        "skewer" => 0.8,
        "knife" => 0.5,
        "flattener" | "roller" | "press" => 0.0,
        _ => 0.4,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KitchenPolicy;

impl KitchenPolicy {
    pub fn respond(&self, role: Role, vars: &BTreeMap<String, String>) -> String {
        let get = |k: &str| vars.get(k).map(String::as_str).unwrap_or("");
        match role {
            Role::SceneComprehension => comprehend(get("user_query"), get("object_list")),
            Role::OverallPlanner => plan(get("user_query"), get("object_list")),
            Role::StepPlanner => step_actions(get("user_query"), get("step"), get("prev_step"), get("geometry")),
            Role::ToolMapper => map_tool(get("tool"), get("db_tools")),
        }
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

fn is_tool_label(label: &str) -> bool {
    TOOL_LABELS.contains(&label)
}

fn comprehend(query: &str, digest: &str) -> String {
    let q = words(query);
    let has = |w: &str| q.iter().any(|x| x == w);
    let names: Vec<&str> = digest
        .lines()
        .map(|l| l.trim().trim_start_matches("- ").trim())
        .filter(|l| !l.is_empty())
        .collect();
    let mut wanted: Vec<&str> = Vec::new();
    for n in &names {
        if has(label_of(n)) {
            wanted.push(n);
        }
    }
    for (verb, tools) in VERB_TOOLS {
        if !has(verb) {
            continue;
        }
        if let Some(t) = tools
            .iter()
            .find_map(|t| names.iter().find(|n| label_of(n) == *t))
        {
            wanted.push(t);
        }
    }
    if has("salad") {
        for label in ["tomato", "apple", "knife", "bowl"] {
            if let Some(n) = names.iter().find(|n| label_of(n) == label) {
                wanted.push(n);
            }
        }
    }
    let mut out = String::new();
    for n in names.iter().filter(|n| wanted.contains(n)) {
        let kind = if is_tool_label(label_of(n)) { "tool" } else { "not tool" };
        out.push_str(&format!("{n}: {kind}\n"));
    }
    out
}

struct Objects(Vec<ObjectEntry>);

impl Objects {
    fn by_label(&self, labels: &[&str]) -> Option<&str> {
        labels
            .iter()
            .find_map(|l| self.0.iter().find(|e| label_of(&e.name) == *l))
            .map(|e| e.name.as_str())
    }

    fn tool_for(&self, verb: &str) -> Option<&str> {
        let (_, labels) = VERB_TOOLS.iter().find(|(v, _)| *v == verb)?;
        self.by_label(labels)
    }

    /// Listed objects in order of first mention in the query.
    fn mentioned(&self, query: &[String]) -> Vec<&str> {
        let mut found: Vec<(usize, &str)> = self
            .0
            .iter()
            .filter_map(|e| {
                query
                    .iter()
                    .position(|w| w == label_of(&e.name))
                    .map(|i| (i, e.name.as_str()))
            })
            .collect();
        found.sort();
        found.into_iter().map(|(_, n)| n).collect()
    }
}

fn orig(n: &str) -> LocationExpr {
    LocationExpr::OriginalOf(n.to_string())
}

fn cur(n: &str) -> LocationExpr {
    LocationExpr::CurrentOf(n.to_string())
}

fn pickup(n: &str) -> HighLevelStep {
    HighLevelStep::new("pickup", orig(n), Some(n), None)
}

fn put_back(tool: &str) -> HighLevelStep {
    HighLevelStep::new("place", orig(tool), None, Some(tool))
}

fn use_tool(verb: &str, object: &str, tool: &str) -> Vec<HighLevelStep> {
    vec![
        pickup(tool),
        HighLevelStep::new(verb, cur(object), Some(object), Some(tool)),
        put_back(tool),
    ]
}

fn plan(query: &str, object_list: &str) -> String {
    let Ok(list) = parse_object_list(object_list) else {
        return String::new();
    };
    let objs = Objects(list);
    let q = words(query);
    let has = |w: &str| q.iter().any(|x| x == w);
    let steps = plan_steps(&objs, &q, &has).unwrap_or_default();
    steps.iter().map(|s| format!("{s}\n")).collect()
}

fn plan_steps(objs: &Objects, q: &[String], has: &dyn Fn(&str) -> bool) -> Option<Vec<HighLevelStep>> {
    let candy = || objs.by_label(&["candy"]);
    let dough = || objs.by_label(&["dough"]);
    if has("salad") {
        let food = objs.by_label(&["tomato", "apple"])?;
        let bowl = objs.by_label(&["bowl"])?;
        return Some(vec![pickup(food), HighLevelStep::new("place", orig(bowl), Some(bowl), None)]);
    }
    if has("flatten") && has("poke") {
        let (d, f, s) = (dough()?, objs.tool_for("flatten")?, objs.tool_for("poke")?);
        let mut v = use_tool("flatten", d, f);
        v.extend(use_tool("poke", d, s));
        return Some(v);
    }
    if has("flatten") && has("scoop") {
        let (d, c, f, s) = (dough()?, candy()?, objs.tool_for("flatten")?, objs.tool_for("scoop")?);
        let mut v = use_tool("flatten", d, f);
        v.push(pickup(s));
        v.push(HighLevelStep::new("scoop", cur(c), Some(c), Some(s)));
        v.push(HighLevelStep::new("pour", cur(d), Some(d), Some(s)));
        v.push(put_back(s));
        return Some(v);
    }
    if has("scoop") {
        let (c, s) = (candy()?, objs.tool_for("scoop")?);
        let receiver = objs.by_label(&["bowl", "cup", "plate"]);
        return Some(match receiver {
            Some(r) => vec![
                pickup(s),
                HighLevelStep::new("scoop", cur(c), Some(c), Some(s)),
                HighLevelStep::new("pour", cur(r), Some(r), Some(s)),
                put_back(s),
            ],
            None => use_tool("scoop", c, s),
        });
    }
    for verb in ["flatten", "whisk", "poke"] {
        if has(verb) {
            let tool = objs.tool_for(verb)?;
            let target = objs.mentioned(q).into_iter().find(|n| *n != tool)?;
            return Some(use_tool(verb, target, tool));
        }
    }
    if has("place") || has("put") || has("move") {
        let named = objs.mentioned(q);
        let (a, b) = (*named.first()?, *named.get(1)?);
        let a_tool = objs.0.iter().any(|e| e.name == a && e.is_tool);
        let last = if a_tool {
            HighLevelStep::new("place", orig(b), Some(b), Some(a))
        } else {
            HighLevelStep::new("place", orig(b), Some(b), None)
        };
        return Some(vec![pickup(a), last]);
    }
    None
}

fn map_tool(tool: &str, db_tools: &str) -> String {
    let db: Vec<&str> = db_tools.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let label = label_of(tool);
    let pick = if db.contains(&label) {
        Some(label)
    } else {
        match label {
            "knife" => Some("spatula"),
            "ladle" | "spoon" => Some("scoop"),
            "roller" | "press" => Some("flattener"),
            "fork" => Some("whisk"),
            _ => None,
        }
        .filter(|t| db.contains(t))
    };
    pick.unwrap_or("none").to_string()
}

/// Placement kind implied by the query wording.
fn wants_inside(query: &str) -> bool {
    let q = words(query);
    ["in", "inside", "into", "within", "salad"]
        .iter()
        .any(|w| q.iter().any(|x| x == w))
}

fn round_cm(v: f64) -> f64 {
    (v * 1000.0).round() / 10.0 + 0.0
}

/// Motion planning context for one step.
struct Ctx<'a> {
    g: &'a GeometryDigest,
}

impl Ctx<'_> {
    fn at(&self, loc: &LocationExpr) -> Option<ObjectGeometry> {
        let key = match loc {
            LocationExpr::CurrentOf(n) => n.clone(),
            other => other.to_string(),
        };
        self.g.entries.get(&key).copied()
    }

    fn obj(&self, name: &str) -> Option<ObjectGeometry> {
        self.g.entries.get(name).copied()
    }

    fn tcp(&self) -> Vec3 {
        Vec3::from(self.g.gripper.position)
    }

    /// Go-to reaching absolute tcp `target` relative to `loc`.
    fn goto(&self, loc: &LocationExpr, target: Vec3) -> Option<LowLevelAction> {
        let base = self.at(loc)?.centroid();
        let d = target - base;
        Some(LowLevelAction::goto(loc.clone(), [round_cm(d.x), round_cm(d.y), round_cm(d.z)]))
    }
}

/// Where the held tool's working end is relative to the tcp.
struct ToolFrame {
    /// Horizontal offset tcp -> head.
    head: Vec3,
    /// Unit horizontal direction tcp -> head.
    dir: Vec3,
    /// Sign of the head direction along the tcp x axis.
    sign: f64,
    /// Height of the tcp above the tool's lowest point.
    lift: f64,
    /// The grasp is too close to the centroid to tell which end is the head;
    /// `head` then points along the tcp x axis and the far side is `rel - head`.
    ambiguous: Option<Vec3>,
}

fn tool_frame(ctx: &Ctx, tool: &str) -> Option<ToolFrame> {
    let g = ctx.obj(tool)?;
    let p = ctx.tcp();
    let yaw = ctx.g.gripper.yaw_deg.to_radians();
    let x = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
    let c = g.centroid();
    let mut rel = c - p;
    rel.z = 0.0;
    let reach = rel.norm();
    let len = g.dims[0].max(g.dims[1]);
    let along = head_fraction(label_of(tool)) * len * 0.5;
    let (head, dir, ambiguous) = if reach < 0.02 {
        (rel + x * along, x, Some(rel - x * along))
    } else {
        let dir = rel / reach;
        (dir * (reach + along), dir, None)
    };
    Some(ToolFrame {
        ambiguous,
        head,
        dir,
        sign: if dir.dot(&x) < 0.0 { -1.0 } else { 1.0 },
        lift: p.z - g.bottom(),
    })
}

fn flat(v: Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0)
}

fn step_actions(query: &str, step: &str, prev: &str, geometry: &str) -> String {
    let (Ok(step), Ok(g)) = (parse_step(step), geometry.parse::<GeometryDigest>()) else {
        return String::new();
    };
    let prev = parse_step(prev).ok();
    let ctx = Ctx { g: &g };
    let actions = match step.action.as_str() {
        "pickup" => pickup_actions(&ctx, &step, prev.as_ref()),
        "place" => place_actions(&ctx, &step, prev.as_ref(), wants_inside(query)),
        "scoop" => scoop_actions(&ctx, &step),
        "pour" => pour_actions(&ctx, &step),
        "flatten" => press_actions(&ctx, &step),
        "whisk" => whisk_actions(&ctx, &step),
        "poke" => poke_actions(&ctx, &step),
        _ => None,
    };
    actions.map(|a| format_action_list(&a)).unwrap_or_default()
}

fn pickup_actions(ctx: &Ctx, step: &HighLevelStep, prev: Option<&HighLevelStep>) -> Option<Vec<LowLevelAction>> {
    let name = step.object.as_deref()?;
    let loc = &step.location;
    let g = ctx.obj(name).or_else(|| ctx.at(loc))?;
    let already = ctx.g.gripper.closed
        && prev.is_some_and(|p| p.action == "pickup" && p.object.as_deref() == Some(name));
    if already {
        return Some(vec![LowLevelAction::goto(cur(name), [0.0, 0.0, 5.0])]);
    }
    let up = round_cm(g.dims[2] * 0.5 + 0.08);
    Some(vec![
        LowLevelAction::goto(loc.clone(), [0.0, 0.0, up]),
        LowLevelAction::goto(loc.clone(), [0.0, 0.0, 0.0]),
        LowLevelAction::Grasp(Gripper::Close),
        LowLevelAction::goto(loc.clone(), [0.0, 0.0, 15.0]),
    ])
}

fn place_actions(
    ctx: &Ctx,
    step: &HighLevelStep,
    prev: Option<&HighLevelStep>,
    inside: bool,
) -> Option<Vec<LowLevelAction>> {
    let loc = &step.location;
    let p = ctx.tcp();
    let held = step
        .tool
        .clone()
        .or_else(|| prev.filter(|s| s.action == "pickup").and_then(|s| s.object.clone()));
    let target_obj = loc.object();
    // A tool going back where it came from.
    if let (Some(tool), Some(LocationExpr::OriginalOf(o))) = (step.tool.as_deref(), Some(loc)) {
        if o == tool {
            let home = ctx.at(loc)?.centroid();
            let now = ctx.obj(tool)?.centroid();
            let off = Vec3::new(p.x - now.x, p.y - now.y, p.z - now.z + 0.01);
            let t = home + off;
            return Some(vec![
                ctx.goto(loc, t + Vec3::new(0.0, 0.0, 0.05))?,
                ctx.goto(loc, t)?,
                LowLevelAction::Grasp(Gripper::Open),
                ctx.goto(loc, t + Vec3::new(0.0, 0.0, 0.10))?,
            ]);
        }
    }
    // A tool set down on another object.
    if step.tool.is_some() {
        return Some(vec![
            LowLevelAction::goto(loc.clone(), [0.0, 0.0, 2.0]),
            LowLevelAction::Grasp(Gripper::Open),
            LowLevelAction::goto(loc.clone(), [0.0, 0.0, 10.0]),
        ]);
    }
    let held = held?;
    let h = ctx.obj(&held)?;
    let s = ctx.at(loc).or_else(|| target_obj.and_then(|o| ctx.obj(o)))?;
    let c = s.centroid();
    if inside {
        let t = c + Vec3::new(0.0, 0.0, 0.5 * s.dims[2] + 0.5 * h.dims[2] + 0.03);
        return Some(vec![
            ctx.goto(loc, t)?,
            LowLevelAction::Grasp(Gripper::Open),
            ctx.goto(loc, t + Vec3::new(0.0, 0.0, 0.10))?,
        ]);
    }
    let mut u = flat(p - c);
    u = if u.norm() < 1e-6 { Vec3::new(-1.0, 0.0, 0.0) } else { u.normalize() };
    let r_s = 0.5 * s.dims[0].max(s.dims[1]);
    let r_h = 0.5 * h.dims[0].max(h.dims[1]);
    let reach = (r_s + r_h + 0.002).min(r_s + 0.02).min(0.085).max(0.04);
    let drop_z = s.bottom() + 0.5 * h.dims[2] + 0.01;
    let t = Vec3::new(c.x + u.x * reach, c.y + u.y * reach, drop_z);
    Some(vec![
        ctx.goto(loc, t + Vec3::new(0.0, 0.0, 0.05))?,
        ctx.goto(loc, t)?,
        LowLevelAction::Grasp(Gripper::Open),
        ctx.goto(loc, t + Vec3::new(0.0, 0.0, 0.10))?,
    ])
}

fn tilt(pitch: f64, yaw: f64) -> LowLevelAction {
    LowLevelAction::tilt([0.0, pitch + 0.0, yaw])
}

fn scoop_actions(ctx: &Ctx, step: &HighLevelStep) -> Option<Vec<LowLevelAction>> {
    let (obj, tool) = (step.object.as_deref()?, step.tool.as_deref()?);
    let tf = tool_frame(ctx, tool)?;
    let o = ctx.obj(obj)?;
    let loc = &step.location;
    let yaw = ctx.g.gripper.yaw_deg;
    let z = o.bottom() + tf.lift + 0.002;
    let start = flat(o.centroid()) - tf.head - tf.dir * 0.07 + Vec3::new(0.0, 0.0, z);
    let end = flat(o.centroid()) - tf.head + tf.dir * 0.01 + Vec3::new(0.0, 0.0, z);
    Some(vec![
        ctx.goto(loc, start + Vec3::new(0.0, 0.0, 0.08))?,
        ctx.goto(loc, start)?,
        ctx.goto(loc, end)?,
        tilt(-tf.sign * 40.0, yaw),
        ctx.goto(loc, end + Vec3::new(0.0, 0.0, 0.08))?,
        tilt(0.0, yaw),
    ])
}

fn pour_actions(ctx: &Ctx, step: &HighLevelStep) -> Option<Vec<LowLevelAction>> {
    let (obj, tool) = (step.object.as_deref()?, step.tool.as_deref()?);
    let tf = tool_frame(ctx, tool)?;
    let r = ctx.obj(obj)?;
    let loc = &step.location;
    let yaw = ctx.g.gripper.yaw_deg;
    let t = flat(r.centroid()) - tf.head + Vec3::new(0.0, 0.0, r.top() + 0.04 + tf.lift);
    Some(vec![
        ctx.goto(loc, t)?,
        tilt(tf.sign * 85.0, yaw),
        tilt(0.0, yaw),
        ctx.goto(loc, t + Vec3::new(0.0, 0.0, 0.05))?,
    ])
}

fn press_actions(ctx: &Ctx, step: &HighLevelStep) -> Option<Vec<LowLevelAction>> {
    let (obj, tool) = (step.object.as_deref()?, step.tool.as_deref()?);
    let tf = tool_frame(ctx, tool)?;
    let o = ctx.obj(obj)?;
    let loc = &step.location;
    let xy = flat(o.centroid()) - tf.head;
    let above = xy + Vec3::new(0.0, 0.0, o.top() + 0.05 + tf.lift);
    let press = xy + Vec3::new(0.0, 0.0, o.bottom() - 0.005 + tf.lift);
    Some(vec![
        ctx.goto(loc, above)?,
        ctx.goto(loc, press)?,
        ctx.goto(loc, press + Vec3::new(0.0, 0.0, 0.10))?,
    ])
}

fn whisk_actions(ctx: &Ctx, step: &HighLevelStep) -> Option<Vec<LowLevelAction>> {
    let (obj, tool) = (step.object.as_deref()?, step.tool.as_deref()?);
    let tf = tool_frame(ctx, tool)?;
    let b = ctx.obj(obj)?;
    let loc = &step.location;
    let xy = flat(b.centroid()) - tf.head;
    let low = xy + Vec3::new(0.0, 0.0, b.bottom() + 0.005 + tf.lift);
    let mut v = vec![
        ctx.goto(loc, xy + Vec3::new(0.0, 0.0, b.top() + 0.05 + tf.lift))?,
        ctx.goto(loc, low)?,
    ];
    for dy in [0.02, -0.02, 0.02, -0.02] {
        v.push(ctx.goto(loc, low + Vec3::new(0.0, dy, 0.0))?);
    }
    v.push(ctx.goto(loc, low + Vec3::new(0.0, 0.0, 0.10))?);
    Some(v)
}

fn poke_actions(ctx: &Ctx, step: &HighLevelStep) -> Option<Vec<LowLevelAction>> {
    let (obj, tool) = (step.object.as_deref()?, step.tool.as_deref()?);
    let tf = tool_frame(ctx, tool)?;
    let o = ctx.obj(obj)?;
    let loc = &step.location;
    let xy = flat(o.centroid()) - tf.head;
    let high = o.top() + 0.05 + tf.lift;
    let low = o.bottom() + 0.001 + tf.lift;
    let mut v = Vec::new();
    // With an unknown head end, poke with both ends in turn.
    for head in std::iter::once(tf.head).chain(tf.ambiguous) {
        let xy = flat(o.centroid()) - head;
        for k in [0.0, 0.012, -0.012] {
            let at = xy + tf.dir * k;
            v.push(ctx.goto(loc, at + Vec3::new(0.0, 0.0, high))?);
            v.push(ctx.goto(loc, at + Vec3::new(0.0, 0.0, low))?);
        }
    }
    v.push(ctx.goto(loc, xy + Vec3::new(0.0, 0.0, high))?);
    Some(v)
}
