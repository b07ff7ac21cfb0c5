//! The end-to-end pipeline: comprehension, grounding, planning, per-step
//! routing to grasping or the step planner, execution and verification.

pub mod trace;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agents::{Agents, BackendConfig, CompletionBackend, GeometryDigest, GripperState, ObjectGeometry};
use crate::dsl::{Gripper, LowLevelAction};
use crate::geometry::{Pose, Vec3};
use crate::grasping::{task_oriented_grasp, GraspConfig, GraspPlan, ToolDb};
use crate::perception::{Observation, RigConfig};
use crate::plan::{requires_tool_pickup, HighLevelStep, LocationExpr, ObjectEntry};
use crate::seeding::derive_seed;
use crate::world::{apply_command, label_of, verify_step, Command, Event, VerificationStatus, WorldState};

pub use trace::{ExecutionTrace, Grounding, Outcome, Route, Stage, StepRecord, TraceError, TrialInfo};

/// Approach height above a grasp pose, meters.
const APPROACH_M: f64 = 0.10;
/// Lift after closing on a tool, meters.
const LIFT_M: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub backend: BackendConfig,
    /// Cameras, depth noise, detector miss and confusion settings.
    pub rig: RigConfig,
    pub no_affordance: bool,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: BackendConfig::Scripted,
            rig: RigConfig::default(),
            no_affordance: false,
            seed: 0,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_depth_noise(mut self, sigma: f64) -> Self {
        self.rig.noise.depth_sigma = sigma;
        self
    }

    pub fn with_confusion_rate(mut self, rate: f64) -> Self {
        self.rig.detector.confusion_rate = rate;
        self
    }

    pub fn with_miss_rate(mut self, rate: f64) -> Self {
        self.rig.detector.miss_rate = rate;
        self
    }

    pub fn with_no_affordance(mut self, on: bool) -> Self {
        self.no_affordance = on;
        self
    }
}

/// Run one query with the backend named in `cfg` and the bundled tool database.
pub fn run_task(query: &str, world: &WorldState, cfg: &RunConfig) -> ExecutionTrace {
    let db = ToolDb::bundled();
    match cfg.backend.build() {
        Ok(b) => run_with(query, world, cfg, b, &db, None),
        Err(e) => {
            let mut t = Pipeline::start(query, world, cfg, None);
            t.abort(Stage::Comprehension, None, format!("backend: {e}"));
            t.trace
        }
    }
}

/// Run one query with an existing backend. The agent transcript and trace
/// are written to `cfg.out_dir` when set.
pub fn run_with(
    query: &str,
    world: &WorldState,
    cfg: &RunConfig,
    backend: Arc<dyn CompletionBackend>,
    db: &ToolDb,
    task: Option<TrialInfo>,
) -> ExecutionTrace {
    let agents = Agents::new(backend);
    let mut p = Pipeline::start(query, world, cfg, task);
    p.run(&agents, db);
    if let Some(dir) = &cfg.out_dir {
        let written = std::fs::create_dir_all(dir)
            .and_then(|_| p.trace.save(&dir.join("trace.jsonl")))
            .and_then(|_| agents.write_transcript(&dir.join("agents.jsonl")));
        if let Err(e) = written {
            log::error!("writing run output to {}: {e}", dir.display());
        }
    }
    p.trace
}

struct Pipeline<'a> {
    cfg: &'a RunConfig,
    world: WorldState,
    trace: ExecutionTrace,
}

fn round4(v: Vec3) -> [f64; 3] {
    [v.x, v.y, v.z].map(|x| (x * 1e4).round() / 1e4 + 0.0)
}

/// Comprehension input: object names, one per line, in scene order.
pub fn scene_digest(world: &WorldState) -> String {
    world.objects.iter().map(|o| format!("{}\n", o.name)).collect()
}

impl<'a> Pipeline<'a> {
    fn start(query: &str, world: &WorldState, cfg: &'a RunConfig, task: Option<TrialInfo>) -> Self {
        Pipeline {
            cfg,
            world: world.clone(),
            trace: ExecutionTrace {
                query: query.to_string(),
                seed: cfg.seed,
                no_affordance: cfg.no_affordance,
                task,
                initial_world: world.clone(),
                comprehension: None,
                grounding: BTreeMap::new(),
                plan: None,
                steps: Vec::new(),
                final_world: world.clone(),
                outcome: Outcome::Completed,
            },
        }
    }

    fn abort(&mut self, stage: Stage, step: Option<usize>, reason: String) {
        log::info!("aborted at {stage:?} (step {step:?}): {reason}");
        self.trace.final_world = self.world.clone();
        self.trace.outcome = Outcome::Aborted { stage, step, reason };
    }

    fn seed(&self, keys: &[&str]) -> u64 {
        derive_seed(self.cfg.seed, keys)
    }

    fn run(&mut self, agents: &Agents, db: &ToolDb) {
        let query = self.trace.query.clone();
        let objects = match agents.scene_comprehension(&query, &scene_digest(&self.world)) {
            Ok(o) => o,
            Err(e) => return self.abort(Stage::Comprehension, None, e.to_string()),
        };
        self.trace.comprehension = Some(objects.clone());

        let obs = Observation::capture(&self.world, &self.cfg.rig, self.seed(&["observe", "initial"]));
        for e in &objects {
            match obs.query(&self.cfg.rig, label_of(&e.name)) {
                Ok(f) => {
                    self.trace.grounding.insert(
                        e.name.clone(),
                        Grounding {
                            centroid: round4(f.centroid),
                            dims: round4(f.dims),
                            logit: f.logit,
                        },
                    );
                }
                Err(err) => return self.abort(Stage::Grounding, None, format!("{}: {err}", e.name)),
            }
        }

        let plan = match agents.overall_plan(&query, &objects) {
            Ok(p) => p,
            Err(e) => return self.abort(Stage::Planning, None, e.to_string()),
        };
        self.trace.plan = Some(plan.clone());

        for (i, step) in plan.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| &plan[j]);
            let next = plan.get(i + 1);
            if let Err((stage, reason)) = self.run_step(agents, db, &objects, i, step, prev, next) {
                return self.abort(stage, Some(i), reason);
            }
        }
        self.trace.final_world = self.world.clone();
        self.trace.outcome = Outcome::Completed;
    }

    #[allow(clippy::too_many_arguments)]
    fn run_step(
        &mut self,
        agents: &Agents,
        db: &ToolDb,
        objects: &[ObjectEntry],
        index: usize,
        step: &HighLevelStep,
        prev: Option<&HighLevelStep>,
        next: Option<&HighLevelStep>,
    ) -> Result<(), (Stage, String)> {
        let started = Instant::now();
        let before = self.world.clone();
        let mut record = StepRecord {
            index,
            step: step.clone(),
            route: Route::StepPlanner,
            geometry: None,
            actions: Vec::new(),
            grasp: None,
            commands: Vec::new(),
            events: Vec::new(),
            world_before: before.clone(),
            world_after: before.clone(),
            verification: None,
            elapsed_ms: 0.0,
        };
        let planned = if requires_tool_pickup(step, objects) {
            record.route = Route::Grasping;
            self.grasp_commands(agents, db, index, step, next).map(|g| {
                let cmds = grasp_sequence(&g);
                record.grasp = Some(g);
                cmds
            })
        } else {
            self.planned_commands(agents, index, step, prev).map(|(g, acts, cmds)| {
                record.geometry = Some(g);
                record.actions = acts;
                cmds
            })
        };
        let result = planned.and_then(|cmds| {
            for c in &cmds {
                match apply_command(&self.world, c) {
                    Ok((w, ev)) => {
                        self.world = w;
                        record.commands.push(c.clone());
                        record.events.extend(ev);
                    }
                    Err(e) => return Err((Stage::Execution, format!("{c}: {e}"))),
                }
            }
            let v = verify_step(&before, &self.world, step);
            let failed = v.status == VerificationStatus::Fail;
            let reason = v.reason.clone();
            record.verification = Some(v);
            if failed {
                Err((Stage::Verification, reason))
            } else {
                Ok(())
            }
        });
        record.world_after = self.world.clone();
        record.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        self.trace.steps.push(record);
        result
    }

    fn grasp_commands(
        &self,
        agents: &Agents,
        db: &ToolDb,
        index: usize,
        step: &HighLevelStep,
        next: Option<&HighLevelStep>,
    ) -> Result<GraspPlan, (Stage, String)> {
        let tool = step.object.as_deref().expect("tool pickups name an object");
        let g = self
            .trace
            .grounding
            .get(tool)
            .ok_or_else(|| (Stage::Grounding, format!("{tool} was not grounded")))?;
        let task = next.map(|n| n.action.as_str()).unwrap_or("pickup");
        let mut gcfg = GraspConfig::from_rig(&self.cfg.rig);
        gcfg.no_affordance = self.cfg.no_affordance;
        let seed = self.seed(&["grasp", &index.to_string()]);
        task_oriented_grasp(&self.world, label_of(tool), &Vec3::from(g.centroid), task, db, agents, &gcfg, seed)
            .map_err(|e| (Stage::Grasping, e.to_string()))
    }

    /// Perceive the step's objects, ask the step planner, and resolve each
    /// action against the perceived geometry.
    fn planned_commands(
        &self,
        agents: &Agents,
        index: usize,
        step: &HighLevelStep,
        prev: Option<&HighLevelStep>,
    ) -> Result<(GeometryDigest, Vec<LowLevelAction>, Vec<Command>), (Stage, String)> {
        let geometry = self.step_geometry(index, step, prev)?;
        let actions = agents
            .step_plan(&self.trace.query, step, prev, &geometry)
            .map_err(|e| (Stage::StepPlanning, e.to_string()))?;
        let mut rpy = self.world.robot.tcp_pose.rpy;
        let mut cmds = Vec::new();
        for a in &actions {
            cmds.push(match a {
                LowLevelAction::GoTo { location, delta_cm } => {
                    let base = resolve(&geometry, location, &self.world)
                        .ok_or_else(|| (Stage::Execution, format!("cannot resolve {location}")))?;
                    Command::MoveTcp(Pose::new((base + Vec3::from(*delta_cm) / 100.0).into(), rpy))
                }
                LowLevelAction::Tilt { angles_deg } => {
                    rpy = Pose::new([0.0; 3], *angles_deg).normalized().rpy;
                    Command::Action(a.clone())
                }
                LowLevelAction::Grasp(_) => Command::Action(a.clone()),
            });
        }
        Ok((geometry, actions, cmds))
    }

    fn step_geometry(
        &self,
        index: usize,
        step: &HighLevelStep,
        prev: Option<&HighLevelStep>,
    ) -> Result<GeometryDigest, (Stage, String)> {
        let mut names: Vec<&str> = Vec::new();
        for s in std::iter::once(step).chain(prev) {
            names.extend(s.object.as_deref());
            names.extend(s.tool.as_deref());
            names.extend(s.location.object());
        }
        names.sort();
        names.dedup();
        let obs = Observation::capture(&self.world, &self.cfg.rig, self.seed(&["observe", &index.to_string()]));
        let mut entries = BTreeMap::new();
        for n in names {
            let f = obs
                .query(&self.cfg.rig, label_of(n))
                .map_err(|e| (Stage::Grounding, format!("{n}: {e}")))?;
            entries.insert(n.to_string(), ObjectGeometry::new(f.centroid, f.dims));
        }
        match &step.location {
            LocationExpr::OriginalOf(o) => {
                let g = self
                    .trace
                    .grounding
                    .get(o)
                    .ok_or_else(|| (Stage::Grounding, format!("{o} was not grounded")))?;
                entries.insert(
                    step.location.to_string(),
                    ObjectGeometry {
                        centroid: g.centroid,
                        dims: g.dims,
                    },
                );
            }
            LocationExpr::Home => {
                entries.insert(
                    step.location.to_string(),
                    ObjectGeometry::new(self.world.robot.home_pose.translation(), Vec3::zeros()),
                );
            }
            LocationExpr::CurrentOf(_) => {}
        }
        for g in entries.values_mut() {
            g.centroid = round4(g.centroid());
            g.dims = round4(g.dims());
        }
        let tcp = self.world.robot.tcp_pose;
        Ok(GeometryDigest {
            gripper: GripperState {
                position: round4(tcp.translation()),
                yaw_deg: (tcp.yaw() * 100.0).round() / 100.0 + 0.0,
                closed: !self.world.robot.gripper_open,
            },
            entries,
        })
    }
}

/// Base-frame point a location phrase refers to, from what was perceived.
fn resolve(g: &GeometryDigest, loc: &LocationExpr, world: &WorldState) -> Option<Vec3> {
    match loc {
        LocationExpr::Home => Some(world.robot.home_pose.translation()),
        LocationExpr::CurrentOf(n) => g.entries.get(n).map(ObjectGeometry::centroid),
        LocationExpr::OriginalOf(_) => g.entries.get(&loc.to_string()).map(ObjectGeometry::centroid),
    }
}

/// Approach from above at the grasp yaw, descend, close, lift.
pub fn grasp_sequence(g: &GraspPlan) -> Vec<Command> {
    let at = g.pose;
    let up = |dz: f64| {
        let mut p = at;
        p.position[2] += dz;
        Command::MoveTcp(p)
    };
    vec![
        up(APPROACH_M),
        Command::MoveTcp(at),
        Command::Action(LowLevelAction::Grasp(Gripper::Close)),
        up(LIFT_M),
    ]
}

/// Events of every step, in order.
pub fn all_events(trace: &ExecutionTrace) -> impl Iterator<Item = &Event> {
    trace.steps.iter().flat_map(|s| s.events.iter())
}
