//! Affordance grasping against centroid grasping on identical scenes.
//!
//! ```text
//! cargo run --release --example ablation -- [trials]
//! ```

use tabletop::harness::{ablation_table, default_specs, run_ablation, Category};
use tabletop::orchestrator::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let specs: Vec<_> = default_specs()
        .into_iter()
        .filter(|s| s.category != Category::Stg)
        .map(|s| s.with_trials(trials))
        .collect();
    let (base, centroid) = run_ablation(&specs, &RunConfig::default())?;
    print!("{}", ablation_table(&base.rows, &centroid.rows));
    Ok(())
}
