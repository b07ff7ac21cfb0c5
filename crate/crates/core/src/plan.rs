//! High-level plan steps: the four-phrase tuple `[action, location, object, tool]`.
//!
//! The canonical text form is one bracketed list of quoted phrases per line:
//!
//! ```text
//! ['pickup', 'original position of tomato', 'tomato', 'none']
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const ORIGINAL_PREFIX: &str = "original position of ";
const CURRENT_PREFIX: &str = "current position of ";
const HOME_PHRASE: &str = "robot home pose";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("malformed step: {0}")]
    Malformed(String),
    #[error("expected 4 phrases, found {0}")]
    Arity(usize),
    #[error("unrecognized location phrase {0:?}")]
    Location(String),
    #[error("empty action")]
    EmptyAction,
}

/// Where an action happens: an object's load-time position, its live
/// position, or the robot's home pose.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LocationExpr {
    OriginalOf(String),
    CurrentOf(String),
    Home,
}

impl LocationExpr {
    pub fn object(&self) -> Option<&str> {
        match self {
            LocationExpr::OriginalOf(o) | LocationExpr::CurrentOf(o) => Some(o),
            LocationExpr::Home => None,
        }
    }
}

impl fmt::Display for LocationExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocationExpr::OriginalOf(o) => write!(f, "{ORIGINAL_PREFIX}{o}"),
            LocationExpr::CurrentOf(o) => write!(f, "{CURRENT_PREFIX}{o}"),
            LocationExpr::Home => f.write_str(HOME_PHRASE),
        }
    }
}

impl FromStr for LocationExpr {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.split_whitespace().collect::<Vec<_>>().join(" ");
        if norm == HOME_PHRASE {
            return Ok(LocationExpr::Home);
        }
        let with_object = |prefix: &str, ctor: fn(String) -> LocationExpr| {
            norm.strip_prefix(prefix)
                .filter(|rest| !rest.is_empty())
                .map(|rest| ctor(rest.to_string()))
        };
        with_object(ORIGINAL_PREFIX, LocationExpr::OriginalOf)
            .or_else(|| with_object(CURRENT_PREFIX, LocationExpr::CurrentOf))
            .ok_or_else(|| PlanError::Location(s.trim().to_string()))
    }
}

impl TryFrom<String> for LocationExpr {
    type Error = PlanError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LocationExpr> for String {
    fn from(l: LocationExpr) -> String {
        l.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighLevelStep {
    pub action: String,
    pub location: LocationExpr,
    pub object: Option<String>,
    pub tool: Option<String>,
}

impl HighLevelStep {
    pub fn new(
        action: impl Into<String>,
        location: LocationExpr,
        object: Option<&str>,
        tool: Option<&str>,
    ) -> Self {
        HighLevelStep {
            action: action.into(),
            location,
            object: object.map(str::to_string),
            tool: tool.map(str::to_string),
        }
    }
}

impl fmt::Display for HighLevelStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "['{}', '{}', '{}', '{}']",
            self.action,
            self.location,
            self.object.as_deref().unwrap_or("none"),
            self.tool.as_deref().unwrap_or("none"),
        )
    }
}

impl FromStr for HighLevelStep {
    type Err = PlanError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_step(s)
    }
}

/// An entry of the scene comprehension list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub name: String,
    pub is_tool: bool,
}

impl ObjectEntry {
    pub fn new(name: impl Into<String>, is_tool: bool) -> Self {
        ObjectEntry {
            name: name.into(),
            is_tool,
        }
    }
}

fn closing_for(open: char) -> Option<char> {
    match open {
        '\'' | '`' | '\u{2018}' => Some('\''),
        '"' | '\u{201c}' => Some('"'),
        _ => None,
    }
}

fn is_closing(c: char, expected: char) -> bool {
    c == expected
        || (expected == '\'' && c == '\u{2019}')
        || (expected == '"' && c == '\u{201d}')
}

/// Split a bracketed list of quoted phrases. A closing quote only counts when
/// followed by a comma or the closing bracket, so apostrophes inside a phrase
/// are kept.
pub fn split_quoted_list(text: &str) -> Result<Vec<String>, PlanError> {
    let t = text.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| PlanError::Malformed("expected a bracketed list".into()))?;
    let chars: Vec<char> = inner.chars().collect();
    let mut items = Vec::new();
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    skip_ws(&mut i);
    if i == chars.len() {
        return Ok(items);
    }
    loop {
        skip_ws(&mut i);
        let open = *chars
            .get(i)
            .ok_or_else(|| PlanError::Malformed("dangling comma".into()))?;
        let close = closing_for(open)
            .ok_or_else(|| PlanError::Malformed(format!("expected a quoted phrase at {open:?}")))?;
        i += 1;
        let start = i;
        let end = loop {
            if i >= chars.len() {
                return Err(PlanError::Malformed("unterminated quote".into()));
            }
            if is_closing(chars[i], close) {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                if j == chars.len() || chars[j] == ',' {
                    break i;
                }
            }
            i += 1;
        };
        items.push(chars[start..end].iter().collect::<String>());
        i = end + 1;
        skip_ws(&mut i);
        if i == chars.len() {
            break;
        }
        // must be a comma here
        i += 1;
    }
    Ok(items)
}

fn optional_name(s: &str) -> Option<String> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("none") {
        None
    } else {
        Some(t.to_string())
    }
}

/// Parse one `[action, location, object, tool]` line.
pub fn parse_step(text: &str) -> Result<HighLevelStep, PlanError> {
    let items = split_quoted_list(text)?;
    if items.len() != 4 {
        return Err(PlanError::Arity(items.len()));
    }
    let action = items[0].trim().to_string();
    if action.is_empty() {
        return Err(PlanError::EmptyAction);
    }
    let location = items[1].parse()?;
    let object = optional_name(&items[2]);
    let tool = optional_name(&items[3]);
    if object.as_deref() == Some("") || tool.as_deref() == Some("") {
        return Err(PlanError::Malformed("empty object or tool phrase".into()));
    }
    Ok(HighLevelStep {
        action,
        location,
        object,
        tool,
    })
}

pub fn serialize_step(step: &HighLevelStep) -> String {
    step.to_string()
}

/// Parse the canonical plan text: one step per non-blank line.
pub fn parse_plan(text: &str) -> Result<Vec<HighLevelStep>, PlanError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_step)
        .collect()
}

pub fn serialize_plan(steps: &[HighLevelStep]) -> String {
    steps.iter().map(|s| format!("{s}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    UnknownObject(String),
    UnknownTool(String),
    NonToolInToolSlot(String),
    UnknownLocationObject(String),
    DuplicateEntry(String),
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticKind::UnknownObject(n) => write!(f, "unknown object {n:?}"),
            DiagnosticKind::UnknownTool(n) => write!(f, "unknown tool {n:?}"),
            DiagnosticKind::NonToolInToolSlot(n) => write!(f, "non-tool in tool slot: {n:?}"),
            DiagnosticKind::UnknownLocationObject(n) => {
                write!(f, "location references unknown object {n:?}")
            }
            DiagnosticKind::DuplicateEntry(n) => write!(f, "duplicate object list entry {n:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based step index; 0 refers to the object list itself.
    pub step: usize,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn for_step(&self, step: usize) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(move |d| d.step == step)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

fn step_diagnostics(step: &HighLevelStep, objects: &BTreeMap<&str, bool>) -> Vec<DiagnosticKind> {
    let mut out = Vec::new();
    if let Some(o) = &step.object {
        if !objects.contains_key(o.as_str()) {
            out.push(DiagnosticKind::UnknownObject(o.clone()));
        }
    }
    if let Some(t) = &step.tool {
        match objects.get(t.as_str()) {
            None => out.push(DiagnosticKind::UnknownTool(t.clone())),
            Some(false) => out.push(DiagnosticKind::NonToolInToolSlot(t.clone())),
            Some(true) => {}
        }
    }
    if let Some(o) = step.location.object() {
        if !objects.contains_key(o) {
            out.push(DiagnosticKind::UnknownLocationObject(o.to_string()));
        }
    }
    out
}

/// Ground a plan against the comprehension list. Every violation is reported.
pub fn validate_plan(steps: &[HighLevelStep], objects: &[ObjectEntry]) -> ValidationReport {
    let mut seen = BTreeSet::new();
    let mut diagnostics = Vec::new();
    for e in objects {
        if !seen.insert(e.name.as_str()) {
            diagnostics.push(Diagnostic {
                step: 0,
                kind: DiagnosticKind::DuplicateEntry(e.name.clone()),
            });
        }
    }
    let table: BTreeMap<&str, bool> = objects.iter().map(|e| (e.name.as_str(), e.is_tool)).collect();
    for (i, step) in steps.iter().enumerate() {
        diagnostics.extend(step_diagnostics(step, &table).into_iter().map(|kind| Diagnostic {
            step: i + 1,
            kind,
        }));
    }
    ValidationReport { diagnostics }
}

/// True when the step picks up something flagged as a tool; those steps go to
/// the grasping pipeline instead of the step planner.
pub fn requires_tool_pickup(step: &HighLevelStep, objects: &[ObjectEntry]) -> bool {
    step.action == "pickup"
        && step
            .object
            .as_deref()
            .is_some_and(|o| objects.iter().any(|e| e.name == o && e.is_tool))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn salad_objects() -> Vec<ObjectEntry> {
        vec![
            ObjectEntry::new("tomato", false),
            ObjectEntry::new("knife", true),
            ObjectEntry::new("bowl", false),
        ]
    }

    #[test]
    fn parses_salad_first_step() {
        let s = parse_step("['pickup', 'original position of tomato', 'tomato', 'none']").unwrap();
        assert_eq!(
            s,
            HighLevelStep::new("pickup", LocationExpr::OriginalOf("tomato".into()), Some("tomato"), None)
        );
    }

    #[test]
    fn parses_place_with_tool() {
        let s = parse_step("['place', 'original position of table', 'table', 'hammer']").unwrap();
        assert_eq!(s.location, LocationExpr::OriginalOf("table".into()));
        assert_eq!(s.object.as_deref(), Some("table"));
        assert_eq!(s.tool.as_deref(), Some("hammer"));
    }

    #[test]
    fn latex_style_quotes_are_accepted() {
        let s = parse_step("[`pickup', `original position of tomato', `tomato', `none']").unwrap();
        assert_eq!(s.action, "pickup");
    }

    #[test]
    fn apostrophes_inside_phrases_survive() {
        let s = parse_step("['pickup', 'current position of chef's knife', 'chef's knife', 'none']").unwrap();
        assert_eq!(s.object.as_deref(), Some("chef's knife"));
    }

    #[test]
    fn arity_error() {
        assert_eq!(parse_step("['pickup','tomato']"), Err(PlanError::Arity(2)));
    }

    #[test]
    fn unknown_location_phrase_is_rejected() {
        assert!(matches!(
            parse_step("['pickup', 'near the tomato', 'tomato', 'none']"),
            Err(PlanError::Location(_))
        ));
    }

    #[test]
    fn home_location_round_trips() {
        let s = HighLevelStep::new("place", LocationExpr::Home, None, Some("scoop"));
        assert_eq!(parse_step(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn empty_plan_is_valid() {
        assert!(validate_plan(&[], &salad_objects()).is_valid());
    }

    #[test]
    fn non_tool_in_tool_slot() {
        let step = parse_step("['cut', 'current position of bowl', 'bowl', 'tomato']").unwrap();
        let r = validate_plan(&[step], &salad_objects());
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].kind, DiagnosticKind::NonToolInToolSlot("tomato".into()));
        assert!(r.diagnostics[0].to_string().contains("non-tool in tool slot"));
    }

    #[test]
    fn reports_every_violation() {
        let step = parse_step("['cut', 'current position of plate', 'cucumber', 'spoon']").unwrap();
        let r = validate_plan(&[step.clone(), step], &salad_objects());
        assert_eq!(r.diagnostics.len(), 6);
        assert_eq!(r.for_step(2).count(), 3);
    }

    #[test]
    fn tool_pickup_routing() {
        let objects = vec![
            ObjectEntry::new("scoop", true),
            ObjectEntry::new("tomato", false),
            ObjectEntry::new("flattener", true),
            ObjectEntry::new("dough", false),
        ];
        let pick_scoop = parse_step("['pickup', 'original position of scoop', 'scoop', 'none']").unwrap();
        let pick_tomato = parse_step("['pickup', 'original position of tomato', 'tomato', 'none']").unwrap();
        let flatten = parse_step("['flatten', 'current position of dough', 'dough', 'flattener']").unwrap();
        assert!(requires_tool_pickup(&pick_scoop, &objects));
        assert!(!requires_tool_pickup(&pick_tomato, &objects));
        assert!(!requires_tool_pickup(&flatten, &objects));
    }
}
