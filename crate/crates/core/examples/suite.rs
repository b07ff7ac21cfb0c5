//! The eight-task battery with the scripted backend.
//!
//! ```text
//! cargo run --release --example suite -- [trials] [seed]
//! ```

use tabletop::harness::{default_specs, run_suite};
use tabletop::orchestrator::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let specs: Vec<_> = default_specs().into_iter().map(|s| s.with_trials(trials)).collect();
    let result = run_suite(&specs, &RunConfig::default().with_seed(seed))?;
    print!("{}", result.markdown());
    for t in result.trials.iter().filter(|t| t.score < 100) {
        println!("{} trial {}: {}", t.spec, t.trial, t.score);
    }
    Ok(())
}
