//! Rasterize the catalog tools into a grasping database directory.
//!
//! ```text
//! cargo run --example build_tool_db -- [out_dir]
//! ```

use std::path::PathBuf;

use tabletop::grasping::tooldb::build_from_fixtures;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/tooldb"));
    let db = build_from_fixtures();
    db.save_dir(&out)?;
    for e in &db.entries {
        println!(
            "{:<10} {}x{} px, tool {} px, handle {} px",
            e.name,
            e.full.width,
            e.full.height,
            e.full.count(),
            e.region.count()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
