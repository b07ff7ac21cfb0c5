//! Gate scoring on hand-built traces, the ablation prefix, empty rows and
//! re-scoring saved traces.

use std::sync::Arc;

use tabletop::agents::{Role, ScriptedBackend};
use tabletop::grasping::ToolDb;
use tabletop::harness::{
    default_specs, read_traces, rows_from_traces, run_suite, run_trial, score_trace, spec_by_id, ExperimentSpec,
    ReportRow,
};
use tabletop::orchestrator::{Outcome, Route, RunConfig, Stage};

fn spec(id: &str) -> ExperimentSpec {
    spec_by_id(&default_specs(), id).unwrap().clone()
}

fn kitchen() -> Arc<ScriptedBackend> {
    Arc::new(ScriptedBackend::kitchen())
}

#[test]
fn perfect_grasping_trial_scores_full() {
    let s = spec("stg-next-to");
    let r = run_trial(&s, 0, &RunConfig::default(), kitchen(), &ToolDb::bundled());
    let trace = r.trace.unwrap();
    assert!(trace.outcome.is_completed());
    assert_eq!(s.gates(&trace), [true; 4]);
    assert_eq!(r.score, 100);
}

#[test]
fn centroid_scoop_stops_at_localization() {
    let s = spec("stt-scoop");
    let cfg = RunConfig::default().with_no_affordance(true);
    let r = run_trial(&s, 0, &cfg, kitchen(), &ToolDb::bundled());
    let trace = r.trace.unwrap();
    let [g25, g50, g75, _] = s.gates(&trace);
    assert!(g25 && g50 && !g75);
    assert!(matches!(trace.outcome, Outcome::Aborted { stage: Stage::Verification, .. }));
    assert_eq!(r.score, 50);
}

#[test]
fn wrong_tool_in_multi_tool_task_scores_half() {
    let s = spec("mtt-flatten-poke");
    let scene = s.scene(0, 0).unwrap();
    let role = |k: &str| scene.roles[k].clone();
    let (skewer, dough) = (role("tool2"), role("target"));
    let plan = format!(
        "['pickup', 'original position of {skewer}', '{skewer}', 'none']\n\
         ['flatten', 'current position of {dough}', '{dough}', '{skewer}']\n\
         ['place', 'original position of {skewer}', 'none', '{skewer}']\n"
    );
    let backend = Arc::new(ScriptedBackend::kitchen().override_role(Role::OverallPlanner, plan));
    let r = run_trial(&s, 0, &RunConfig::default(), backend, &ToolDb::bundled());
    let trace = r.trace.unwrap();
    assert_eq!(trace.steps.len(), 2, "aborts on the flatten step");
    assert!(!trace.final_world.effects_of(&dough).flattened);
    assert_eq!(r.score, 50);
}

#[test]
fn a_later_gate_never_counts_without_the_earlier_ones() {
    let s = spec("stg-next-to");
    let mut trace = run_trial(&s, 1, &RunConfig::default(), kitchen(), &ToolDb::bundled()).trace.unwrap();
    assert_eq!(score_trace(&trace, &s), 100);
    trace.comprehension = None;
    let g = s.gates(&trace);
    assert_eq!(g, [false, true, true, true]);
    assert_eq!(score_trace(&trace, &s), 0);
}

#[test]
fn ablation_diverges_only_from_the_first_tool_grasp() {
    let db = ToolDb::bundled();
    for id in ["stt-scoop", "stt-whisk", "mtt-scoop-into-bowl"] {
        let s = spec(id);
        for trial in 0..2 {
            let base = run_trial(&s, trial, &RunConfig::default(), kitchen(), &db).trace.unwrap();
            let cfg = RunConfig::default().with_no_affordance(true);
            let abl = run_trial(&s, trial, &cfg, kitchen(), &db).trace.unwrap();
            assert_eq!(base.comprehension, abl.comprehension);
            assert_eq!(base.grounding, abl.grounding);
            assert_eq!(base.plan, abl.plan);
            let first = base.steps.iter().position(|st| st.route == Route::Grasping).expect("a tool grasp");
            assert!(abl.steps.len() > first, "{id}");
            for (a, b) in base.steps[..first].iter().zip(&abl.steps[..first]) {
                let (mut a, mut b) = (a.clone(), b.clone());
                a.elapsed_ms = 0.0;
                b.elapsed_ms = 0.0;
                assert_eq!(a, b, "{id} trial {trial} step {}", a.index);
            }
            assert_ne!(base.steps[first].grasp, abl.steps[first].grasp, "{id}");
        }
    }
}

#[test]
fn zero_trials_give_an_empty_row() {
    let specs: Vec<_> = default_specs().into_iter().take(2).map(|s| s.with_trials(0)).collect();
    let res = run_suite(&specs, &RunConfig::default()).unwrap();
    assert!(res.trials.is_empty());
    for (row, s) in res.rows.iter().zip(&specs) {
        assert_eq!(*row, ReportRow::empty(s));
        assert_eq!(row.rate(0), 0.0);
    }
}

#[test]
fn saved_traces_rescore_to_the_suite_rows() {
    let dir = tempfile::tempdir().unwrap();
    let specs: Vec<_> = default_specs()
        .into_iter()
        .filter(|s| ["stg-next-to", "stt-scoop"].contains(&s.id))
        .map(|s| s.with_trials(2))
        .collect();
    let cfg = RunConfig {
        out_dir: Some(dir.path().to_path_buf()),
        ..RunConfig::default()
    }
    .with_no_affordance(true);
    let res = run_suite(&specs, &cfg).unwrap();
    let traces: Vec<_> = read_traces(dir.path()).unwrap().into_iter().map(|(_, t)| t).collect();
    assert_eq!(traces.len(), 4);
    let rows = rows_from_traces(&default_specs(), &traces);
    let centroid: Vec<_> = rows[&true].iter().filter(|r| r.trials > 0).cloned().collect();
    assert_eq!(centroid, res.rows);
    assert!(rows.get(&false).is_none_or(|r| r.iter().all(|r| r.trials == 0)));
    assert!(res.rows.iter().all(ReportRow::is_monotone));
}
