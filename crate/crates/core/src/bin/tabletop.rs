//! Command-line front end: single runs, the experiment suite, the grasping
//! ablation and re-rendering of stored traces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tabletop::agents::{BackendConfig, RemoteConfig};
use tabletop::harness::report::{ReportRow, ablation_table, read_traces, rows_from_traces, to_csv, to_markdown};
use tabletop::harness::{default_specs, run_ablation, run_suite, score_trace, spec_by_id, ExperimentSpec, SuiteResult};
use tabletop::grasping::ToolDb;
use tabletop::orchestrator::{run_with, RunConfig, TrialInfo};

#[derive(Parser)]
#[command(name = "tabletop", version, about = "Table-top tool-use planning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one trial of one task and print its trace summary.
    Run {
        /// Task id, e.g. stt-scoop.
        #[arg(long, default_value = "stg-next-to")]
        task: String,
        #[arg(long, default_value_t = 0)]
        trial: u32,
        /// Replace the task's query text.
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        no_affordance: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run the experiment battery and print the gate table.
    Suite {
        #[command(flatten)]
        select: Select,
        /// Grasp tools at their centroid.
        #[arg(long)]
        no_affordance: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Affordance grasping against centroid grasping on the same scenes.
    Ablate {
        #[command(flatten)]
        select: Select,
        #[command(flatten)]
        common: Common,
    },
    /// Re-score traces stored under a directory.
    Report {
        /// Directory holding trace.jsonl files.
        dir: PathBuf,
        /// Write results.csv and results.md here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Select {
    /// Only tasks whose id contains this text.
    #[arg(long)]
    only: Option<String>,
    #[arg(long, default_value_t = 10)]
    trials: u32,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `scripted`, or a TOML file describing a remote endpoint.
    #[arg(long, default_value = "scripted")]
    backend: String,
    /// Depth noise standard deviation, meters.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Probability that a query returns its confusion partner.
    #[arg(long, default_value_t = 0.0)]
    confusion_rate: f64,
    /// Probability that a camera misses an object.
    #[arg(long, default_value_t = 0.0)]
    miss_rate: f64,
    /// Directory for traces, transcripts and tables.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let backend = if self.backend == "scripted" {
            BackendConfig::Scripted
        } else {
            let text = std::fs::read_to_string(&self.backend)
                .with_context(|| format!("reading backend config {}", self.backend))?;
            let remote: RemoteConfig = toml::from_str(&text).context("parsing backend config")?;
            BackendConfig::Remote(remote)
        };
        let cfg = RunConfig {
            backend,
            out_dir: self.out.clone(),
            ..RunConfig::default()
        }
        .with_seed(self.seed)
        .with_depth_noise(self.noise)
        .with_confusion_rate(self.confusion_rate)
        .with_miss_rate(self.miss_rate);
        Ok(cfg)
    }
}

fn select(sel: &Select) -> Result<Vec<ExperimentSpec>> {
    let specs: Vec<ExperimentSpec> = default_specs()
        .into_iter()
        .filter(|s| sel.only.as_deref().is_none_or(|o| s.id.contains(o)))
        .map(|s| s.with_trials(sel.trials))
        .collect();
    if specs.is_empty() {
        bail!("no task matches {:?}", sel.only.as_deref().unwrap_or_default());
    }
    Ok(specs)
}

fn write_tables(dir: &Path, csv: &str, md: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), csv)?;
    std::fs::write(dir.join("results.md"), md)?;
    Ok(())
}

fn emit(result: &SuiteResult, out: Option<&Path>) -> Result<()> {
    print!("{}", result.markdown());
    if let Some(dir) = out {
        write_tables(dir, &result.csv(), &result.markdown())?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Cmd::Run {
            task,
            trial,
            query,
            no_affordance,
            common,
        } => {
            let specs = default_specs();
            let Some(spec) = spec_by_id(&specs, &task) else {
                bail!("unknown task {task}");
            };
            let scene = spec.scene(common.seed, trial)?;
            let query = query.unwrap_or_else(|| spec.query(&scene.roles));
            let cfg = common.config()?.with_no_affordance(no_affordance);
            let info = TrialInfo {
                spec: spec.id.to_string(),
                trial,
                relevant: scene.relevant,
                roles: scene.roles,
            };
            let trace = run_with(&query, &scene.world, &cfg, cfg.backend.build()?, &ToolDb::bundled(), Some(info));
            println!("query: {query}");
            for s in &trace.steps {
                println!("step {}: {:?} {}", s.index, s.route, s.step);
            }
            println!("outcome: {:?}", trace.outcome);
            println!("score: {}", score_trace(&trace, spec));
        }
        Cmd::Suite {
            select: sel,
            no_affordance,
            common,
        } => {
            let cfg = common.config()?.with_no_affordance(no_affordance);
            let result = run_suite(&select(&sel)?, &cfg)?;
            emit(&result, common.out.as_deref())?;
        }
        Cmd::Ablate { select: sel, common } => {
            let (base, centroid) = run_ablation(&select(&sel)?, &common.config()?)?;
            println!("Affordance grasping\n");
            emit(&base, common.out.as_ref().map(|d| d.join("affordance")).as_deref())?;
            println!("\nCentroid grasping\n");
            emit(&centroid, common.out.as_ref().map(|d| d.join("centroid")).as_deref())?;
            let table = ablation_table(&base.rows, &centroid.rows);
            println!("\n{table}");
            if let Some(dir) = &common.out {
                std::fs::write(dir.join("ablation.md"), table)?;
            }
        }
        Cmd::Report { dir, out } => {
            let traces: Vec<_> = read_traces(&dir)?.into_iter().map(|(_, t)| t).collect();
            if traces.is_empty() {
                bail!("no trace.jsonl under {}", dir.display());
            }
            let rows = rows_from_traces(&default_specs(), &traces);
            let rows: BTreeMap<bool, Vec<ReportRow>> = rows
                .into_iter()
                .map(|(mode, r)| (mode, r.into_iter().filter(|r| r.trials > 0).collect()))
                .collect();
            for (no_affordance, r) in &rows {
                let title = if *no_affordance { "Centroid grasping" } else { "Affordance grasping" };
                println!("{title}\n\n{}", to_markdown(r));
                if let Some(o) = &out {
                    let sub = if *no_affordance { "centroid" } else { "affordance" };
                    write_tables(&o.join(sub), &to_csv(r), &to_markdown(r))?;
                }
            }
            if let (Some(b), Some(c)) = (rows.get(&false), rows.get(&true)) {
                println!("{}", ablation_table(b, c));
            }
        }
    }
    Ok(())
}
