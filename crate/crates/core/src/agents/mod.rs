//! The four language-model roles behind one completion interface.
//!
//! Every response passes a strict parser before it leaves this module.
//! Unparseable responses are re-asked with the parser's complaint appended.

pub mod backend;
pub mod parse;
pub mod policy;
pub mod prompts;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{validate_sequence, LowLevelAction, SequenceContext};
use crate::plan::{validate_plan, HighLevelStep, ObjectEntry};

pub use backend::{
    input_digest, BackendConfig, BackendError, CompletionBackend, CompletionRequest, RemoteBackend, RemoteConfig, Role,
    ScriptedBackend, ScriptedEntry, ScriptedTable,
};
pub use parse::{format_object_list, GeometryDigest, GripperState, ObjectGeometry};
pub use policy::KitchenPolicy;
pub use prompts::{PromptSet, PromptTemplate, TemplateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("{role}: {source}")]
    Backend {
        role: Role,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{role}: unusable response after {attempts} attempts: {message}")]
    Parse { role: Role, attempts: u32, message: String },
    #[error("overall planner returned no steps")]
    EmptyPlan,
}

/// One prompt and its answer, as recorded for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub role: Role,
    pub attempt: u32,
    pub digest: String,
    pub prompt: String,
    pub response: Result<String, String>,
}

pub struct Agents {
    backend: Arc<dyn CompletionBackend>,
    prompts: PromptSet,
    /// Extra attempts after an unparseable response.
    pub parse_retries: u32,
    transcript: Mutex<Vec<Exchange>>,
}

const DIAGNOSTICS: &str = "diagnostics";

impl Agents {
    pub fn new(backend: Arc<dyn CompletionBackend>) -> Self {
        Agents {
            backend,
            prompts: PromptSet::bundled(),
            parse_retries: 2,
            transcript: Mutex::new(Vec::new()),
        }
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn transcript(&self) -> Vec<Exchange> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    /// Write the transcript as one JSON object per line.
    pub fn write_transcript(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in self.transcript() {
            writeln!(f, "{}", serde_json::to_string(&e).expect("exchange serializes"))?;
        }
        f.flush()
    }

    /// Ask `role` until `accept` takes the response or `attempts` run out.
    fn ask<T>(
        &self,
        role: Role,
        mut vars: BTreeMap<String, String>,
        attempts: u32,
        accept: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, AgentError> {
        let template = self.prompts.get(role);
        let mut last = String::new();
        for attempt in 1..=attempts {
            let mut prompt = template.render(&vars)?;
            if let Some(d) = vars.get(DIAGNOSTICS) {
                prompt.push_str("\n\nYour previous answer was rejected:\n");
                prompt.push_str(d);
                prompt.push('\n');
            }
            let req = CompletionRequest {
                role,
                prompt,
                vars: vars.clone(),
            };
            let result = self.backend.complete(&req);
            self.transcript.lock().expect("transcript lock").push(Exchange {
                role,
                attempt,
                digest: req.digest(),
                prompt: req.prompt.clone(),
                response: result.clone().map_err(|e| e.to_string()),
            });
            let text = result.map_err(|source| AgentError::Backend { role, source })?;
            match accept(&text) {
                Ok(v) => return Ok(v),
                Err(m) => {
                    log::debug!("{role} attempt {attempt} rejected: {m}");
                    vars.insert(DIAGNOSTICS.to_string(), m.clone());
                    last = m;
                }
            }
        }
        Err(AgentError::Parse {
            role,
            attempts,
            message: last,
        })
    }

    /// Relevant objects for the query, from a digest of scene object names.
    pub fn scene_comprehension(&self, query: &str, scene_digest: &str) -> Result<Vec<ObjectEntry>, AgentError> {
        let vars = vars(&[("user_query", query), ("object_list", scene_digest)]);
        self.ask(Role::SceneComprehension, vars, 1 + self.parse_retries, parse::parse_object_list)
    }

    /// High-level steps that parse and ground against `objects`. One
    /// re-prompt carries the diagnostics of a rejected plan.
    pub fn overall_plan(&self, query: &str, objects: &[ObjectEntry]) -> Result<Vec<HighLevelStep>, AgentError> {
        let vars = vars(&[("user_query", query), ("object_list", &format_object_list(objects))]);
        let accept = |text: &str| {
            let steps = parse::parse_plan_response(text)?;
            let report = validate_plan(&steps, objects);
            if report.is_valid() {
                Ok(steps)
            } else {
                Err(report.to_string())
            }
        };
        let steps = self.ask(Role::OverallPlanner, vars, 2, accept)?;
        if steps.is_empty() {
            return Err(AgentError::EmptyPlan);
        }
        Ok(steps)
    }

    /// Gripper commands for one step. The sequence must be non-empty and
    /// free of redundancy flags given whether the gripper starts closed.
    pub fn step_plan(
        &self,
        query: &str,
        step: &HighLevelStep,
        prev: Option<&HighLevelStep>,
        geometry: &GeometryDigest,
    ) -> Result<Vec<LowLevelAction>, AgentError> {
        let prev_text = prev.map(|p| p.to_string()).unwrap_or_else(|| "none".to_string());
        let vars = vars(&[
            ("user_query", query),
            ("step", &step.to_string()),
            ("prev_step", &prev_text),
            ("geometry", &geometry.to_string()),
        ]);
        let ctx = SequenceContext::new(geometry.gripper.closed);
        let accept = |text: &str| {
            let actions = parse::parse_action_list(text)?;
            if actions.is_empty() {
                return Err("empty action list".to_string());
            }
            let report = validate_sequence(&actions, ctx);
            if !report.is_clean() {
                return Err(report
                    .flags
                    .iter()
                    .map(|f| format!("action {}: {:?}", f.index + 1, f.kind))
                    .collect::<Vec<_>>()
                    .join("\n"));
            }
            Ok(actions)
        };
        self.ask(Role::StepPlanner, vars, 1 + self.parse_retries, accept)
    }

    /// Database tool most similar to `query_tool` for `task`, or `None` when
    /// the answer is `none` or not in the list.
    pub fn map_tool(&self, query_tool: &str, task: &str, db_tools: &[String]) -> Result<Option<String>, AgentError> {
        let vars = vars(&[("tool", query_tool), ("task", task), ("db_tools", &db_tools.join(", "))]);
        self.ask(Role::ToolMapper, vars, 1 + self.parse_retries, |t| parse::parse_mapping(t, db_tools))
    }
}

impl crate::grasping::ToolMapper for Agents {
    fn map_tool(&self, query_tool: &str, task: &str, db_tools: &[String]) -> Option<String> {
        Agents::map_tool(self, query_tool, task, db_tools).unwrap_or_else(|e| {
            log::warn!("tool mapping failed: {e}");
            None
        })
    }
}

fn vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
