//! Save traces from a small suite, then rebuild the tables from disk alone.
//!
//! ```text
//! cargo run --release --example report -- [dir]
//! ```

use tabletop::harness::{default_specs, read_traces, rows_from_traces, run_suite, to_markdown};
use tabletop::orchestrator::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tabletop-report"));
    let specs: Vec<_> = default_specs().into_iter().take(3).map(|s| s.with_trials(2)).collect();
    let cfg = RunConfig {
        out_dir: Some(dir.clone()),
        ..RunConfig::default()
    };
    let live = run_suite(&specs, &cfg)?;
    let traces: Vec<_> = read_traces(&dir)?.into_iter().map(|(_, t)| t).collect();
    println!("{} traces under {}", traces.len(), dir.display());
    let rows = rows_from_traces(&specs, &traces);
    let stored = to_markdown(&rows[&false]);
    print!("{stored}");
    println!("matches live run: {}", stored == live.markdown());
    Ok(())
}
