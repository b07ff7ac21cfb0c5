//! Text-completion backends.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::policy::KitchenPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    SceneComprehension,
    OverallPlanner,
    StepPlanner,
    ToolMapper,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::SceneComprehension,
        Role::OverallPlanner,
        Role::StepPlanner,
        Role::ToolMapper,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::SceneComprehension => "scene_comprehension",
            Role::OverallPlanner => "overall_planner",
            Role::StepPlanner => "step_planner",
            Role::ToolMapper => "tool_mapper",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One call to a backend: the rendered prompt plus the values bound into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub role: Role,
    pub prompt: String,
    pub vars: BTreeMap<String, String>,
}

impl CompletionRequest {
    /// Hex sha256 over the role and the sorted, length-prefixed variables.
    pub fn digest(&self) -> String {
        input_digest(self.role, &self.vars)
    }
}

pub fn input_digest(role: Role, vars: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    let mut put = |s: &str| {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s.as_bytes());
    };
    put(role.as_str());
    for (k, v) in vars {
        put(k);
        put(v);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("http status {0}")]
    Http(u16),
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("environment variable {0} holding the API token is not set")]
    MissingToken(String),
    #[error("no scripted response for {role} input {digest}")]
    NoEntry { role: Role, digest: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<BackendError> },
}

impl BackendError {
    fn retryable(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Transport(_) | BackendError::Malformed(_) => true,
            BackendError::Http(s) => *s == 429 || *s >= 500,
            _ => false,
        }
    }
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

/// Table-driven responses keyed by (role, input digest), with per-role
/// overrides for fault injection and a rule-based fallback policy.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    pub table: BTreeMap<(Role, String), String>,
    pub overrides: BTreeMap<Role, String>,
    pub policy: Option<KitchenPolicy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEntry {
    pub role: Role,
    pub digest: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTable {
    #[serde(default)]
    pub entries: Vec<ScriptedEntry>,
}

impl ScriptedBackend {
    /// Kitchen policy only.
    pub fn kitchen() -> Self {
        ScriptedBackend {
            policy: Some(KitchenPolicy),
            ..Default::default()
        }
    }

    pub fn with_table(mut self, table: ScriptedTable) -> Self {
        for e in table.entries {
            self.table.insert((e.role, e.digest), e.response);
        }
        self
    }

    pub fn insert(&mut self, role: Role, vars: &BTreeMap<String, String>, response: impl Into<String>) {
        self.table.insert((role, input_digest(role, vars)), response.into());
    }

    /// Answer every request of `role` with `response`.
    pub fn override_role(mut self, role: Role, response: impl Into<String>) -> Self {
        self.overrides.insert(role, response.into());
        self
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        if let Some(r) = self.overrides.get(&request.role) {
            return Ok(r.clone());
        }
        let digest = request.digest();
        if let Some(r) = self.table.get(&(request.role, digest.clone())) {
            return Ok(r.clone());
        }
        self.policy
            .as_ref()
            .map(|p| p.respond(request.role, &request.vars))
            .ok_or(BackendError::NoEntry {
                role: request.role,
                digest,
            })
    }
}

/// Chat-completion endpoint over HTTP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    2
}

pub struct RemoteBackend {
    cfg: RemoteConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl RemoteBackend {
    pub fn new(cfg: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_s))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(RemoteBackend { cfg, client })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn attempt(&self, request: &CompletionRequest, token: Option<&str>) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let mut req = self.client.post(&self.cfg.endpoint).json(&body);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Http(status.as_u16()));
        }
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("no choices".into()))
    }
}

impl CompletionBackend for RemoteBackend {
    /// At most `max_retries + 1` attempts, each bounded by the timeout, with
    /// no sleeping in between.
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let token = match &self.cfg.token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| BackendError::MissingToken(var.clone()))?),
            None => None,
        };
        let attempts = self.cfg.max_retries + 1;
        let mut last = None;
        for i in 0..attempts {
            match self.attempt(request, token.as_deref()) {
                Ok(text) => return Ok(text),
                Err(e) if e.retryable() => {
                    log::warn!("{} attempt {} failed: {e}", request.role, i + 1);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(BackendError::Exhausted {
            attempts,
            last: Box::new(last.expect("at least one attempt")),
        })
    }
}

/// Backend selection as it appears in run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    #[default]
    Scripted,
    Remote(RemoteConfig),
}

impl BackendConfig {
    pub fn build(&self) -> Result<std::sync::Arc<dyn CompletionBackend>, BackendError> {
        Ok(match self {
            BackendConfig::Scripted => std::sync::Arc::new(ScriptedBackend::kitchen()),
            BackendConfig::Remote(cfg) => std::sync::Arc::new(RemoteBackend::new(cfg.clone())?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn digest_depends_on_role_and_values_only() {
        let a = vars(&[("user_query", "x"), ("object_list", "y")]);
        let b = vars(&[("object_list", "y"), ("user_query", "x")]);
        assert_eq!(input_digest(Role::OverallPlanner, &a), input_digest(Role::OverallPlanner, &b));
        assert_ne!(input_digest(Role::OverallPlanner, &a), input_digest(Role::StepPlanner, &a));
        // length prefixes keep ("ab","c") apart from ("a","bc")
        assert_ne!(
            input_digest(Role::ToolMapper, &vars(&[("ab", "c")])),
            input_digest(Role::ToolMapper, &vars(&[("a", "bc")]))
        );
    }

    #[test]
    fn table_then_policy_then_miss() {
        let v = vars(&[("tool", "ladle"), ("task", "pickup"), ("db_tools", "scoop, whisk")]);
        let mut b = ScriptedBackend::default();
        let req = CompletionRequest {
            role: Role::ToolMapper,
            prompt: String::new(),
            vars: v.clone(),
        };
        assert!(matches!(b.complete(&req), Err(BackendError::NoEntry { .. })));
        b.insert(Role::ToolMapper, &v, "whisk");
        assert_eq!(b.complete(&req).unwrap(), "whisk");
        let k = ScriptedBackend::kitchen();
        assert_eq!(k.complete(&req).unwrap(), "scoop");
        let o = ScriptedBackend::kitchen().override_role(Role::ToolMapper, "gibberish");
        assert_eq!(o.complete(&req).unwrap(), "gibberish");
    }

    #[test]
    fn backend_config_parses_from_toml() {
        let c: BackendConfig = toml::from_str(
            "kind = \"remote\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nmodel = \"m\"\ntoken_env = \"API_KEY\"\n",
        )
        .unwrap();
        let BackendConfig::Remote(r) = c else { panic!() };
        assert_eq!(r.max_retries, 2);
        assert_eq!(r.token_env.as_deref(), Some("API_KEY"));
    }
}
