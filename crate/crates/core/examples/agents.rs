//! The four agent roles against the scripted kitchen backend.
//!
//! ```text
//! cargo run --example agents -- ["query"]
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use tabletop::agents::{Agents, GeometryDigest, GripperState, ObjectGeometry, ScriptedBackend};
use tabletop::orchestrator::scene_digest;
use tabletop::fixtures;
use tabletop::geometry::Pose;
use tabletop::world::shape::Composite;
use tabletop::world::WorldState;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let query = std::env::args().nth(1).unwrap_or_else(|| "Whisk the empty bowl".to_string());
    let mut world = WorldState::empty(0.0, Pose::new([0.3, 0.0, 0.4], [0.0; 3]));
    world.objects.push(fixtures::whisk("whisk", [0.45, -0.1], 0.0));
    world.objects.push(fixtures::bowl("bowl", [0.55, 0.1]));
    world.objects.push(fixtures::apple("apple", [0.65, -0.05]));
    let agents = Agents::new(Arc::new(ScriptedBackend::kitchen()));

    let objects = agents.scene_comprehension(&query, &scene_digest(&world))?;
    println!("relevant: {objects:?}");
    let plan = agents.overall_plan(&query, &objects)?;
    for s in &plan {
        println!("step: {s}");
    }
    let entries: BTreeMap<String, ObjectGeometry> = world
        .objects
        .iter()
        .map(|o| (o.name.clone(), ObjectGeometry::new(o.volume_centroid(), o.world_aabb().extents())))
        .collect();
    let mut entries = entries;
    if let Some(name) = plan[0].location.object() {
        let g = entries[name];
        entries.insert(plan[0].location.to_string(), g);
    }
    let digest = GeometryDigest {
        gripper: GripperState {
            position: [0.3, 0.0, 0.4],
            yaw_deg: 0.0,
            closed: false,
        },
        entries,
    };
    for a in agents.step_plan(&query, &plan[0], None, &digest)? {
        println!("  {a}");
    }
    let db: Vec<String> = tabletop::fixtures::DB_TOOLS.iter().map(|s| s.to_string()).collect();
    println!("whisk maps to {:?}", agents.map_tool("whisk", "whisk", &db)?);
    println!("{} exchanges recorded", agents.transcript().len());
    Ok(())
}
