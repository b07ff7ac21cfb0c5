//! Prompt templates with `{placeholder}` slots.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::backend::Role;

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").expect("valid regex"));

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("template {role} leaves {{{name}}} unbound")]
    Unbound { role: Role, name: String },
    #[error("reading prompt for {role}: {message}")]
    Io { role: Role, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub role: Role,
    pub text: String,
}

impl PromptTemplate {
    pub fn new(role: Role, text: impl Into<String>) -> Self {
        PromptTemplate { role, text: text.into() }
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        PLACEHOLDER
            .captures_iter(&self.text)
            .map(|c| c[1].to_string())
            .collect()
    }

    /// Substitute every placeholder; extra variables are ignored.
    pub fn render(&self, vars: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        if let Some(missing) = self.placeholders().into_iter().find(|p| !vars.contains_key(p)) {
            return Err(TemplateError::Unbound {
                role: self.role,
                name: missing,
            });
        }
        Ok(PLACEHOLDER
            .replace_all(&self.text, |c: &regex::Captures| vars[&c[1]].clone())
            .into_owned())
    }
}

/// One template per role.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    templates: BTreeMap<Role, PromptTemplate>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::bundled()
    }
}

impl PromptSet {
    pub fn bundled() -> Self {
        let texts = [
            (Role::SceneComprehension, include_str!("../../prompts/scene_comprehension.txt")),
            (Role::OverallPlanner, include_str!("../../prompts/overall_planner.txt")),
            (Role::StepPlanner, include_str!("../../prompts/step_planner.txt")),
            (Role::ToolMapper, include_str!("../../prompts/tool_mapper.txt")),
        ];
        PromptSet {
            templates: texts
                .into_iter()
                .map(|(r, t)| (r, PromptTemplate::new(r, t)))
                .collect(),
        }
    }

    /// Bundled templates, replaced by `<role>.txt` files found in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::bundled();
        for role in Role::ALL {
            let path = dir.join(format!("{}.txt", role.as_str()));
            if path.is_file() {
                let text = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                    role,
                    message: e.to_string(),
                })?;
                set.templates.insert(role, PromptTemplate::new(role, text));
            }
        }
        Ok(set)
    }

    pub fn get(&self, role: Role) -> &PromptTemplate {
        &self.templates[&role]
    }
}
