//! Fuse the four cage cameras into per-object centroids and extents.
//!
//! ```text
//! cargo run --example perception -- [depth_noise_m]
//! ```

use tabletop::fixtures;
use tabletop::geometry::Pose;
use tabletop::perception::{query_object, RigConfig};
use tabletop::world::shape::Composite;
use tabletop::world::WorldState;

fn main() {
    let sigma: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let mut world = WorldState::empty(0.0, Pose::new([0.3, 0.0, 0.4], [0.0; 3]));
    world.objects.push(fixtures::cup("cup", [0.45, -0.12]));
    world.objects.push(fixtures::bowl("bowl", [0.55, 0.08]));
    world.objects.push(fixtures::scoop("scoop", [0.62, -0.1], 30.0));
    let mut rig = RigConfig::default();
    rig.noise.depth_sigma = sigma;
    println!("{:<6} {:>28} {:>28} {:>8}", "object", "perceived centroid", "true centroid", "err mm");
    for o in &world.objects {
        let truth = o.volume_centroid();
        match query_object(&world, &rig, o.label(), 7) {
            Ok(f) => println!(
                "{:<6} {:>28} {:>28} {:>8.2}",
                o.name,
                format!("{:.4?}", [f.centroid.x, f.centroid.y, f.centroid.z]),
                format!("{:.4?}", [truth.x, truth.y, truth.z]),
                (f.centroid - truth).norm() * 1e3
            ),
            Err(e) => println!("{:<6} not found: {e}", o.name),
        }
    }
}
