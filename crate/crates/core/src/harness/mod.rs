//! Experiment battery: task specs with randomized scenes, the four
//! partial-success gates, suites, the centroid-grasp ablation and reports.

pub mod report;
pub mod scene;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::CompletionBackend;
use crate::grasping::ToolDb;
use crate::orchestrator::{run_with, ExecutionTrace, Route, RunConfig, TrialInfo};
use crate::seeding::{derive_seed, stream};
use crate::world::shape::Composite;
use crate::world::WorldState;

pub use report::{ablation_table, read_traces, rows_from_traces, to_csv, to_markdown, ReportRow};
pub use scene::{generate, GeneratedScene, PlacementError, Slot};

/// Distance band counted as "next to", meters, on the table plane.
pub const NEXT_TO_M: (f64, f64) = (0.03, 0.10);
/// Perceived centroid tolerance for the localization gate.
pub const GROUNDING_TOL_M: f64 = 0.01;
pub const DEFAULT_TRIALS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "STG")]
    Stg,
    #[serde(rename = "STT")]
    Stt,
    #[serde(rename = "MTT")]
    Mtt,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Stg => "STG",
            Category::Stt => "STT",
            Category::Mtt => "MTT",
        }
    }
}

/// A tool-object interaction whose result is recorded in the world effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    /// Role `a` contains role `b`.
    Contains(&'static str, &'static str),
    Flattened(&'static str),
    Whisked(&'static str),
    Poked(&'static str),
}

impl Effect {
    pub fn holds(&self, world: &WorldState, roles: &BTreeMap<String, String>) -> bool {
        let r = |k: &str| roles.get(k).map(String::as_str).unwrap_or("");
        match *self {
            Effect::Contains(a, b) => world.effects_of(r(a)).contains.contains(r(b)),
            Effect::Flattened(a) => world.effects_of(r(a)).flattened,
            Effect::Whisked(a) => world.effects_of(r(a)).whisked,
            Effect::Poked(a) => world.effects_of(r(a)).holes_poked > 0,
        }
    }
}

/// What the last two gates check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    /// `obj1` ends up beside `obj2`.
    NextTo,
    /// `obj1` ends up inside the footprint of `obj2`, above its base.
    Within,
    /// The `tool` role is grasped in its graspable region, then the effect.
    ToolUse(Effect),
    /// Two effects in sequence.
    TwoInteractions(Effect, Effect),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub id: &'static str,
    pub category: Category,
    pub task: &'static str,
    /// Query with `{role}` placeholders.
    pub template: &'static str,
    pub slots: &'static [Slot],
    pub distractors: usize,
    pub trials: u32,
    pub goal: Goal,
}

const ITEMS: &[&str] = &["tomato", "apple", "block"];

const STG_NEXT: &[Slot] = &[Slot::relevant("obj1", ITEMS), Slot::relevant("obj2", &["bowl", "plate", "cup"])];
const STG_WITHIN: &[Slot] = &[Slot::relevant("obj1", ITEMS), Slot::relevant("obj2", &["bowl"])];
const STT_SCOOP: &[Slot] = &[Slot::relevant("tool", &["scoop"]), Slot::relevant("target", &["candy"])];
const STT_FLATTEN: &[Slot] = &[Slot::relevant("tool", &["flattener"]), Slot::relevant("target", &["dough"])];
const STT_WHISK: &[Slot] = &[Slot::relevant("tool", &["whisk"]), Slot::relevant("target", &["bowl"])];
const MTT_BOWL: &[Slot] = &[
    Slot::relevant("tool", &["scoop"]),
    Slot::relevant("target", &["candy"]),
    Slot::relevant("receiver", &["bowl"]),
];
const MTT_POKE: &[Slot] = &[
    Slot::relevant("tool", &["flattener"]),
    Slot::relevant("tool2", &["skewer"]),
    Slot::relevant("target", &["dough"]),
];
const MTT_DOUGH: &[Slot] = &[
    Slot::relevant("tool", &["flattener"]),
    Slot::relevant("tool2", &["scoop"]),
    Slot::relevant("target", &["dough"]),
    Slot::relevant("candy", &["candy"]),
    Slot::extra("lookalike", &["spatula"]),
];

/// The eight tasks: two single-task grasping, three single tool-use and
/// three multi tool-use.
pub fn default_specs() -> Vec<ExperimentSpec> {
    let spec = |id, category, task, template, slots, distractors, goal| ExperimentSpec {
        id,
        category,
        task,
        template,
        slots,
        distractors,
        trials: DEFAULT_TRIALS,
        goal,
    };
    vec![
        spec("stg-next-to", Category::Stg, "Place obj1 next to obj2", "Place the {obj1} next to the {obj2}", STG_NEXT, 1, Goal::NextTo),
        spec("stg-within", Category::Stg, "Place obj1 within obj2", "Place the {obj1} in the {obj2}", STG_WITHIN, 1, Goal::Within),
        spec("stt-scoop", Category::Stt, "Scoop candy", "Scoop up the {target}", STT_SCOOP, 1, Goal::ToolUse(Effect::Contains("tool", "target"))),
        spec("stt-flatten", Category::Stt, "Flatten dough", "Flatten the ball of {target}", STT_FLATTEN, 1, Goal::ToolUse(Effect::Flattened("target"))),
        spec("stt-whisk", Category::Stt, "Whisk bowl", "Whisk the empty {target}", STT_WHISK, 1, Goal::ToolUse(Effect::Whisked("target"))),
        spec(
            "mtt-scoop-into-bowl",
            Category::Mtt,
            "Scoop candy into bowl",
            "Scoop the {target} and place it inside a {receiver}",
            MTT_BOWL,
            0,
            Goal::TwoInteractions(Effect::Contains("tool", "target"), Effect::Contains("receiver", "target")),
        ),
        spec(
            "mtt-flatten-poke",
            Category::Mtt,
            "Flatten dough and poke holes",
            "Flatten the {target} and poke holes in it",
            MTT_POKE,
            0,
            Goal::TwoInteractions(Effect::Flattened("target"), Effect::Poked("target")),
        ),
        spec(
            "mtt-scoop-onto-dough",
            Category::Mtt,
            "Scoop candy onto flattened dough",
            "Flatten the {target}, and scoop {candy} onto it",
            MTT_DOUGH,
            0,
            Goal::TwoInteractions(Effect::Flattened("target"), Effect::Contains("target", "candy")),
        ),
    ]
}

pub fn spec_by_id<'a>(specs: &'a [ExperimentSpec], id: &str) -> Option<&'a ExperimentSpec> {
    specs.iter().find(|s| s.id == id)
}

impl ExperimentSpec {
    pub fn with_trials(mut self, trials: u32) -> Self {
        self.trials = trials;
        self
    }

    pub fn query(&self, roles: &BTreeMap<String, String>) -> String {
        roles
            .iter()
            .fold(self.template.to_string(), |q, (k, v)| q.replace(&format!("{{{k}}}"), v))
    }

    /// Seeded scene for one trial.
    pub fn scene(&self, seed: u64, trial: u32) -> Result<GeneratedScene, PlacementError> {
        let mut rng = stream(seed, &["scene", self.id, &trial.to_string()]);
        generate(&mut rng, self.slots, self.distractors)
    }

    /// Results of the four gates in order, before enforcing monotonicity.
    pub fn gates(&self, trace: &ExecutionTrace) -> [bool; 4] {
        let empty = BTreeMap::new();
        let (relevant, roles) = match &trace.task {
            Some(t) => (t.relevant.clone(), &t.roles),
            None => (Vec::new(), &empty),
        };
        let r = |k: &str| roles.get(k).map(String::as_str).unwrap_or("");
        let mut listed: Vec<String> = trace.comprehension.iter().flatten().map(|e| e.name.clone()).collect();
        listed.sort();
        let g25 = trace.comprehension.is_some() && listed == relevant;
        let g50 = !relevant.is_empty()
            && relevant.iter().all(|n| {
                match (trace.grounding.get(n), trace.initial_world.object(n)) {
                    (Some(g), Some(o)) => {
                        (crate::geometry::Vec3::from(g.centroid) - o.volume_centroid()).norm() <= GROUNDING_TOL_M
                    }
                    _ => false,
                }
            });
        let fin = &trace.final_world;
        let (g75, g100) = match self.goal {
            Goal::NextTo | Goal::Within => {
                let obj1 = r("obj1");
                let held = trace.worlds().any(|w| w.robot.held_object.as_deref() == Some(obj1));
                (held, placed(fin, obj1, r("obj2"), self.goal))
            }
            Goal::ToolUse(effect) => {
                let tool = r("tool");
                let grasped = trace.steps.iter().any(|s| {
                    s.route == Route::Grasping
                        && s.step.object.as_deref() == Some(tool)
                        && s.world_after.robot.held_object.as_deref() == Some(tool)
                        && s.world_after.robot.grasp_in_region
                });
                (grasped, effect.holds(fin, roles))
            }
            Goal::TwoInteractions(first, second) => {
                (trace.worlds().any(|w| first.holds(w, roles)), second.holds(fin, roles))
            }
        };
        [g25, g50, g75, g100]
    }
}

fn placed(world: &WorldState, obj1: &str, obj2: &str, goal: Goal) -> bool {
    let (Some(a), Some(b)) = (world.object(obj1), world.object(obj2)) else {
        return false;
    };
    if world.robot.held_object.as_deref() == Some(obj1) {
        return false;
    }
    let (ca, cb) = (a.volume_centroid(), b.volume_centroid());
    let d = ((ca.x - cb.x).powi(2) + (ca.y - cb.y).powi(2)).sqrt();
    match goal {
        Goal::NextTo => (NEXT_TO_M.0..=NEXT_TO_M.1).contains(&d),
        Goal::Within => {
            let bb = b.world_aabb();
            let center = 0.5 * (bb.min + bb.max);
            let r = ((ca.x - center.x).powi(2) + (ca.y - center.y).powi(2)).sqrt();
            r <= b.footprint_radius() && ca.z > bb.min.z
        }
        _ => false,
    }
}

/// Gate level reached: 0, 25, 50, 75 or 100. A gate only counts if every
/// earlier gate passed.
pub fn score_trace(trace: &ExecutionTrace, spec: &ExperimentSpec) -> u8 {
    25 * spec.gates(trace).iter().take_while(|g| **g).count() as u8
}

/// One finished trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub spec: &'static str,
    pub trial: u32,
    pub score: u8,
    /// `None` when the scene could not be generated.
    pub trace: Option<ExecutionTrace>,
}

/// Seed used by the pipeline for one trial.
pub fn trial_seed(seed: u64, spec: &ExperimentSpec, trial: u32) -> u64 {
    derive_seed(seed, &["trial", spec.id, &trial.to_string()])
}

/// Run one trial. Traces go to `<out_dir>/<spec id>/trial-NN` when set.
pub fn run_trial(
    spec: &ExperimentSpec,
    trial: u32,
    cfg: &RunConfig,
    backend: Arc<dyn CompletionBackend>,
    db: &ToolDb,
) -> TrialResult {
    let scene = match spec.scene(cfg.seed, trial) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{} trial {trial}: {e}", spec.id);
            return TrialResult {
                spec: spec.id,
                trial,
                score: 0,
                trace: None,
            };
        }
    };
    let trial_cfg = RunConfig {
        seed: trial_seed(cfg.seed, spec, trial),
        out_dir: cfg.out_dir.as_ref().map(|d| trial_dir(d, spec, trial)),
        ..cfg.clone()
    };
    let info = TrialInfo {
        spec: spec.id.to_string(),
        trial,
        relevant: scene.relevant.clone(),
        roles: scene.roles.clone(),
    };
    let trace = run_with(&spec.query(&scene.roles), &scene.world, &trial_cfg, backend, db, Some(info));
    TrialResult {
        spec: spec.id,
        trial,
        score: score_trace(&trace, spec),
        trace: Some(trace),
    }
}

pub fn trial_dir(out: &Path, spec: &ExperimentSpec, trial: u32) -> std::path::PathBuf {
    out.join(spec.id).join(format!("trial-{trial:02}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub no_affordance: bool,
    pub rows: Vec<ReportRow>,
    pub trials: Vec<TrialResult>,
}

impl SuiteResult {
    pub fn csv(&self) -> String {
        to_csv(&self.rows)
    }

    pub fn markdown(&self) -> String {
        to_markdown(&self.rows)
    }
}

/// Run every trial of every spec. Trials run in parallel; results are
/// reduced in spec order then trial order.
pub fn run_suite(specs: &[ExperimentSpec], cfg: &RunConfig) -> Result<SuiteResult, crate::agents::BackendError> {
    let backend = cfg.backend.build()?;
    Ok(run_suite_with(specs, cfg, backend, &ToolDb::bundled()))
}

pub fn run_suite_with(
    specs: &[ExperimentSpec],
    cfg: &RunConfig,
    backend: Arc<dyn CompletionBackend>,
    db: &ToolDb,
) -> SuiteResult {
    let jobs: Vec<(&ExperimentSpec, u32)> = specs.iter().flat_map(|s| (0..s.trials).map(move |t| (s, t))).collect();
    let trials: Vec<TrialResult> = jobs
        .par_iter()
        .map(|(s, t)| run_trial(s, *t, cfg, backend.clone(), db))
        .collect();
    let rows = specs
        .iter()
        .map(|s| ReportRow::from_scores(s, trials.iter().filter(|r| r.spec == s.id).map(|r| r.score)))
        .collect();
    SuiteResult {
        no_affordance: cfg.no_affordance,
        rows,
        trials,
    }
}

/// Baseline and centroid-grasp suites over the same scenes and seeds.
pub fn run_ablation(
    specs: &[ExperimentSpec],
    cfg: &RunConfig,
) -> Result<(SuiteResult, SuiteResult), crate::agents::BackendError> {
    let backend = cfg.backend.build()?;
    let db = ToolDb::bundled();
    let sub = |name: &str, no_affordance: bool| RunConfig {
        no_affordance,
        out_dir: cfg.out_dir.as_ref().map(|d| d.join(name)),
        ..cfg.clone()
    };
    let base = run_suite_with(specs, &sub("affordance", false), backend.clone(), &db);
    let ablated = run_suite_with(specs, &sub("centroid", true), backend, &db);
    Ok((base, ablated))
}
