//! One query through the whole pipeline, with trace and transcript on disk.
//!
//! ```text
//! cargo run --example run_task -- [out_dir]
//! ```

use tabletop::fixtures;
use tabletop::geometry::Pose;
use tabletop::orchestrator::{run_task, RunConfig};
use tabletop::world::WorldState;

fn main() {
    let mut world = WorldState::empty(0.0, Pose::new([0.3, 0.0, 0.4], [0.0; 3]));
    world.objects.push(fixtures::flattener("flattener", [0.45, -0.12], 20.0));
    world.objects.push(fixtures::dough("dough", [0.58, 0.06]));
    let cfg = RunConfig {
        out_dir: std::env::args().nth(1).map(Into::into),
        ..RunConfig::default()
    };
    let trace = run_task("Flatten the ball of dough", &world, &cfg);
    for s in &trace.steps {
        println!("{} {:?} -> {} commands", s.step, s.route, s.commands.len());
    }
    println!("outcome {:?}", trace.outcome);
    println!("dough flattened: {}", trace.final_world.effects_of("dough").flattened);
}
