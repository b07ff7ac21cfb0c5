//! Task-oriented grasp of a rotated tool: database region transfer against
//! the centroid grasp.
//!
//! ```text
//! cargo run --example grasping -- [tool] [yaw_deg]
//! ```

use tabletop::fixtures;
use tabletop::geometry::Pose;
use tabletop::grasping::{task_oriented_grasp, GraspConfig, ToolDb};
use tabletop::perception::RigConfig;
use tabletop::world::shape::Composite;
use tabletop::world::WorldState;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let tool = args.next().unwrap_or_else(|| "scoop".to_string());
    let yaw: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(40.0);
    let mut world = WorldState::empty(0.0, Pose::new([0.3, 0.0, 0.4], [0.0; 3]));
    let obj = fixtures::by_label(&tool, &tool, [0.55, 0.0], yaw).ok_or("unknown tool")?;
    let centroid = obj.volume_centroid();
    world.objects.push(obj);
    let db = ToolDb::bundled();
    let same = |q: &str, _: &str, names: &[String]| names.iter().find(|n| n.as_str() == q).cloned();
    for no_affordance in [false, true] {
        let cfg = GraspConfig {
            no_affordance,
            ..GraspConfig::from_rig(&RigConfig::default())
        };
        let g = task_oriented_grasp(&world, &tool, &centroid, "use", &db, &same, &cfg, 0)?;
        let p = g.pose.translation();
        let local = world.objects[0].pose.inverse_transform_point(&p);
        let on_handle = world.objects[0]
            .graspable_region
            .is_some_and(|r| (0..2).all(|k| (local[k] - r.center[k]).abs() <= r.size[k] * 0.5 + 0.003));
        println!(
            "{:<9} pixel ({}, {}) angle {:>5.1} -> world [{:.3}, {:.3}, {:.3}], on handle: {on_handle}, path {:?}",
            if no_affordance { "centroid" } else { "region" },
            g.candidate.u,
            g.candidate.v,
            g.candidate.angle_deg,
            p.x,
            p.y,
            p.z,
            g.path
        );
    }
    Ok(())
}
