//! Execution traces and their line-oriented storage.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::GeometryDigest;
use crate::dsl::LowLevelAction;
use crate::grasping::GraspPlan;
use crate::plan::{HighLevelStep, ObjectEntry};
use crate::world::{apply_command, Command, Event, ExecError, VerificationResult, WorldState};

/// Which module turned a step into commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Grasping,
    StepPlanner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Comprehension,
    Grounding,
    Planning,
    Grasping,
    StepPlanning,
    Execution,
    Verification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Aborted {
        stage: Stage,
        /// 0-based index of the step being run, if any.
        step: Option<usize>,
        reason: String,
    },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }
}

/// Perceived position of one listed object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub centroid: [f64; 3],
    pub dims: [f64; 3],
    pub logit: f64,
}

/// What an experiment trial asked for, kept with the trace for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialInfo {
    pub spec: String,
    pub trial: u32,
    /// Objects the comprehension list must name.
    pub relevant: Vec<String>,
    /// Role name (e.g. `obj1`, `tool`) to object name.
    pub roles: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub step: HighLevelStep,
    pub route: Route,
    pub geometry: Option<GeometryDigest>,
    pub actions: Vec<LowLevelAction>,
    pub grasp: Option<GraspPlan>,
    pub commands: Vec<Command>,
    pub events: Vec<Event>,
    pub world_before: WorldState,
    pub world_after: WorldState,
    pub verification: Option<VerificationResult>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub query: String,
    pub seed: u64,
    pub no_affordance: bool,
    pub task: Option<TrialInfo>,
    pub initial_world: WorldState,
    pub comprehension: Option<Vec<ObjectEntry>>,
    pub grounding: BTreeMap<String, Grounding>,
    pub plan: Option<Vec<HighLevelStep>>,
    pub steps: Vec<StepRecord>,
    pub final_world: WorldState,
    pub outcome: Outcome,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header {
        query: String,
        seed: u64,
        no_affordance: bool,
        task: Option<TrialInfo>,
        initial_world: WorldState,
        comprehension: Option<Vec<ObjectEntry>>,
        grounding: BTreeMap<String, Grounding>,
        plan: Option<Vec<HighLevelStep>>,
    },
    Step(Box<StepRecord>),
    Footer {
        final_world: WorldState,
        outcome: Outcome,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

impl ExecutionTrace {
    /// Every command in execution order.
    pub fn commands(&self) -> impl Iterator<Item = &Command> {
        self.steps.iter().flat_map(|s| s.commands.iter())
    }

    /// Re-run the recorded commands on the recorded initial world.
    pub fn replay(&self) -> Result<WorldState, ExecError> {
        self.commands()
            .try_fold(self.initial_world.clone(), |w, c| apply_command(&w, c).map(|(w, _)| w))
    }

    /// One header line, one line per step, one footer line.
    pub fn write_jsonl(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut put = |l: &Line| writeln!(out, "{}", serde_json::to_string(l).expect("trace serializes"));
        put(&Line::Header {
            query: self.query.clone(),
            seed: self.seed,
            no_affordance: self.no_affordance,
            task: self.task.clone(),
            initial_world: self.initial_world.clone(),
            comprehension: self.comprehension.clone(),
            grounding: self.grounding.clone(),
            plan: self.plan.clone(),
        })?;
        for s in &self.steps {
            put(&Line::Step(Box::new(s.clone())))?;
        }
        put(&Line::Footer {
            final_world: self.final_world.clone(),
            outcome: self.outcome.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut f)?;
        f.flush()
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self, TraceError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut footer = None;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| TraceError::Format { line: i + 1, message };
            match serde_json::from_str::<Line>(&line).map_err(|e| bad(e.to_string()))? {
                h @ Line::Header { .. } if header.is_none() => header = Some(h),
                Line::Step(s) if header.is_some() && footer.is_none() => steps.push(*s),
                Line::Footer { final_world, outcome } if header.is_some() && footer.is_none() => {
                    footer = Some((final_world, outcome))
                }
                _ => return Err(bad("record out of order".into())),
            }
        }
        let missing = |what: &str| TraceError::Format {
            line: 0,
            message: format!("no {what} record"),
        };
        let Some(Line::Header {
            query,
            seed,
            no_affordance,
            task,
            initial_world,
            comprehension,
            grounding,
            plan,
        }) = header
        else {
            return Err(missing("header"));
        };
        let (final_world, outcome) = footer.ok_or_else(|| missing("footer"))?;
        Ok(ExecutionTrace {
            query,
            seed,
            no_affordance,
            task,
            initial_world,
            comprehension,
            grounding,
            plan,
            steps,
            final_world,
            outcome,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// The initial world followed by the world after each step.
    pub fn worlds(&self) -> impl Iterator<Item = &WorldState> {
        std::iter::once(&self.initial_world).chain(self.steps.iter().map(|s| &s.world_after))
    }
}
