//! Gate-count rows, CSV and markdown tables, and re-scoring stored traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{score_trace, spec_by_id, Category, ExperimentSpec};
use crate::orchestrator::{ExecutionTrace, TraceError};

/// Trials passing each gate (25, 50, 75, 100) out of `trials`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub category: Category,
    pub task: String,
    pub trials: u32,
    pub gates: [u32; 4],
}

impl ReportRow {
    pub fn empty(spec: &ExperimentSpec) -> Self {
        ReportRow {
            category: spec.category,
            task: spec.task.to_string(),
            trials: 0,
            gates: [0; 4],
        }
    }

    pub fn from_scores(spec: &ExperimentSpec, scores: impl IntoIterator<Item = u8>) -> Self {
        let mut row = Self::empty(spec);
        for s in scores {
            row.trials += 1;
            for (g, n) in row.gates.iter_mut().enumerate() {
                if s as usize >= 25 * (g + 1) {
                    *n += 1;
                }
            }
        }
        row
    }

    /// Fraction of trials passing gate `g` (0..4); 0 with no trials.
    pub fn rate(&self, g: usize) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            f64::from(self.gates[g]) / f64::from(self.trials)
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.gates.windows(2).all(|w| w[0] >= w[1]) && self.gates[0] <= self.trials
    }
}

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from("category,task,trials,g25,g50,g75,g100\n");
    for r in rows {
        let [a, b, c, d] = r.gates;
        writeln!(s, "{},{},{},{a},{b},{c},{d}", r.category.as_str(), r.task, r.trials).expect("string write");
    }
    s
}

fn cell(n: u32, trials: u32) -> String {
    format!("{n}/{trials}")
}

/// Success at each gate, one row per task, grouped by category.
pub fn to_markdown(rows: &[ReportRow]) -> String {
    let mut s = String::from("| Category | Task | 25% | 50% | 75% | 100% |\n|---|---|---|---|---|---|\n");
    for r in rows {
        let g: Vec<String> = r.gates.iter().map(|n| cell(*n, r.trials)).collect();
        writeln!(s, "| {} | {} | {} |", r.category.as_str(), r.task, g.join(" | ")).expect("string write");
    }
    s
}

/// Affordance grasping against centroid grasping at the last two gates, for
/// tasks that use tools.
pub fn ablation_table(base: &[ReportRow], centroid: &[ReportRow]) -> String {
    let mut s = String::from(
        "| Task | Affordance 75% | Affordance 100% | Centroid 75% | Centroid 100% |\n|---|---|---|---|---|\n",
    );
    for b in base.iter().filter(|r| r.category != Category::Stg) {
        let Some(c) = centroid.iter().find(|c| c.task == b.task) else {
            continue;
        };
        writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            b.task,
            cell(b.gates[2], b.trials),
            cell(b.gates[3], b.trials),
            cell(c.gates[2], c.trials),
            cell(c.gates[3], c.trials)
        )
        .expect("string write");
    }
    s
}

/// Every `trace.jsonl` below `dir`, in path order.
pub fn read_traces(dir: &Path) -> Result<Vec<(PathBuf, ExecutionTrace)>, TraceError> {
    let mut paths = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "trace.jsonl") {
                paths.push(p);
            }
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| ExecutionTrace::load(&p).map(|t| (p, t)))
        .collect()
}

/// Re-score stored traces. Rows follow `specs` order and are split by
/// grasping mode; specs without traces give empty rows.
pub fn rows_from_traces(specs: &[ExperimentSpec], traces: &[ExecutionTrace]) -> BTreeMap<bool, Vec<ReportRow>> {
    let mut by_mode: BTreeMap<bool, BTreeMap<&str, Vec<(u32, u8)>>> = BTreeMap::new();
    for t in traces {
        let Some(info) = &t.task else { continue };
        let Some(spec) = spec_by_id(specs, &info.spec) else { continue };
        by_mode
            .entry(t.no_affordance)
            .or_default()
            .entry(spec.id)
            .or_default()
            .push((info.trial, score_trace(t, spec)));
    }
    if by_mode.is_empty() {
        by_mode.insert(false, BTreeMap::new());
    }
    by_mode
        .into_iter()
        .map(|(mode, per_spec)| {
            let rows = specs
                .iter()
                .map(|s| match per_spec.get(s.id) {
                    Some(v) => ReportRow::from_scores(s, v.iter().map(|(_, sc)| *sc)),
                    None => ReportRow::empty(s),
                })
                .collect();
            (mode, rows)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::default_specs;

    #[test]
    fn rows_count_cumulative_gates() {
        let spec = &default_specs()[0];
        let r = ReportRow::from_scores(spec, [100, 75, 50, 0, 25, 100]);
        assert_eq!(r.trials, 6);
        assert_eq!(r.gates, [5, 4, 3, 2]);
        assert!(r.is_monotone());
        assert!((r.rate(3) - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_trials_is_an_empty_row() {
        let spec = &default_specs()[2];
        let r = ReportRow::from_scores(spec, []);
        assert_eq!(r, ReportRow::empty(spec));
        assert_eq!(r.rate(0), 0.0);
        assert_eq!(to_csv(&[r.clone()]).lines().nth(1), Some("STT,Scoop candy,0,0,0,0,0"));
        assert!(to_markdown(&[r]).contains("| STT | Scoop candy | 0/0 | 0/0 | 0/0 | 0/0 |"));
    }

    #[test]
    fn ablation_table_skips_grasping_tasks() {
        let specs = default_specs();
        let base: Vec<_> = specs.iter().map(|s| ReportRow::from_scores(s, [100; 2])).collect();
        let cen: Vec<_> = specs.iter().map(|s| ReportRow::from_scores(s, [50, 75])).collect();
        let t = ablation_table(&base, &cen);
        assert_eq!(t.lines().count(), 2 + 6);
        assert!(t.contains("| Scoop candy | 2/2 | 2/2 | 1/2 | 0/2 |"));
        assert!(!t.contains("next to"));
    }

    #[test]
    fn no_traces_gives_empty_rows() {
        let specs = default_specs();
        let rows = rows_from_traces(&specs, &[]);
        assert_eq!(rows[&false].len(), 8);
        assert!(rows[&false].iter().all(|r| r.trials == 0));
    }
}
