//! Database of tool silhouettes with their graspable regions.
//!
//! On disk each tool is a directory holding `full.pgm`, `region.pgm` and
//! `meta.toml`. Templates are top-down views in the tool frame with image u
//! along tool +x and v along tool -y, the same convention as the wrist camera.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::perception::image::Mask;
use crate::world::SceneObject;

#[derive(Debug, Error)]
pub enum ToolDbError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("metadata: {0}")]
    Meta(#[from] toml::de::Error),
    #[error("tool {name}: {problem}")]
    Invalid { name: String, problem: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolMeta {
    pub name: String,
    pub meters_per_pixel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolDbEntry {
    pub name: String,
    pub full: Mask,
    pub region: Mask,
    pub meters_per_pixel: f64,
}

impl ToolDbEntry {
    pub fn validate(&self) -> Result<(), ToolDbError> {
        let bad = |problem: &str| {
            Err(ToolDbError::Invalid {
                name: self.name.clone(),
                problem: problem.to_string(),
            })
        };
        if self.full.is_empty() || self.region.is_empty() {
            return bad("empty mask");
        }
        if (self.full.width, self.full.height) != (self.region.width, self.region.height) {
            return bad("mask sizes differ");
        }
        if !self.region.is_subset_of(&self.full) {
            return bad("graspable region leaves the tool mask");
        }
        if self.meters_per_pixel <= 0.0 || !self.meters_per_pixel.is_finite() {
            return bad("non-positive pixel scale");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ToolDb {
    pub entries: Vec<ToolDbEntry>,
}

const BUNDLED: [(&str, &str, &[u8], &[u8]); 5] = [
    (
        "scoop",
        include_str!("../../assets/tooldb/scoop/meta.toml"),
        include_bytes!("../../assets/tooldb/scoop/full.pgm"),
        include_bytes!("../../assets/tooldb/scoop/region.pgm"),
    ),
    (
        "flattener",
        include_str!("../../assets/tooldb/flattener/meta.toml"),
        include_bytes!("../../assets/tooldb/flattener/full.pgm"),
        include_bytes!("../../assets/tooldb/flattener/region.pgm"),
    ),
    (
        "whisk",
        include_str!("../../assets/tooldb/whisk/meta.toml"),
        include_bytes!("../../assets/tooldb/whisk/full.pgm"),
        include_bytes!("../../assets/tooldb/whisk/region.pgm"),
    ),
    (
        "hammer",
        include_str!("../../assets/tooldb/hammer/meta.toml"),
        include_bytes!("../../assets/tooldb/hammer/full.pgm"),
        include_bytes!("../../assets/tooldb/hammer/region.pgm"),
    ),
    (
        "spatula",
        include_str!("../../assets/tooldb/spatula/meta.toml"),
        include_bytes!("../../assets/tooldb/spatula/full.pgm"),
        include_bytes!("../../assets/tooldb/spatula/region.pgm"),
    ),
];

fn entry_from(meta: &str, full: Mask, region: Mask) -> Result<ToolDbEntry, ToolDbError> {
    let meta: ToolMeta = toml::from_str(meta)?;
    let e = ToolDbEntry {
        name: meta.name,
        full,
        region,
        meters_per_pixel: meta.meters_per_pixel,
    };
    e.validate()?;
    Ok(e)
}

impl ToolDb {
    /// The database shipped with the crate.
    pub fn bundled() -> Self {
        let entries = BUNDLED
            .iter()
            .map(|(name, meta, full, region)| {
                let full = Mask::from_pgm_bytes(full).expect("bundled mask decodes");
                let region = Mask::from_pgm_bytes(region).expect("bundled mask decodes");
                let e = entry_from(meta, full, region).expect("bundled entry is valid");
                assert_eq!(&e.name, name);
                e
            })
            .collect();
        ToolDb { entries }
    }

    /// Every subdirectory of `dir` holding a tool, in name order.
    pub fn load_dir(dir: &Path) -> Result<Self, ToolDbError> {
        let mut subdirs: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join("meta.toml").is_file())
            .collect();
        subdirs.sort();
        let mut entries = Vec::new();
        for d in subdirs {
            let meta = std::fs::read_to_string(d.join("meta.toml"))?;
            entries.push(entry_from(
                &meta,
                Mask::load_pgm(&d.join("full.pgm"))?,
                Mask::load_pgm(&d.join("region.pgm"))?,
            )?);
        }
        Ok(ToolDb { entries })
    }

    pub fn save_dir(&self, dir: &Path) -> Result<(), ToolDbError> {
        for e in &self.entries {
            e.validate()?;
            let d = dir.join(&e.name);
            std::fs::create_dir_all(&d)?;
            let meta = ToolMeta {
                name: e.name.clone(),
                meters_per_pixel: e.meters_per_pixel,
            };
            std::fs::write(d.join("meta.toml"), toml::to_string(&meta).expect("meta serializes"))?;
            e.full.save_pgm(&d.join("full.pgm"))?;
            e.region.save_pgm(&d.join("region.pgm"))?;
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ToolDbEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Rasterize a tool's top-down silhouette and graspable region in its own
/// frame, with `margin_px` empty pixels on every side.
pub fn rasterize(tool: &SceneObject, meters_per_pixel: f64, margin_px: u32) -> Result<ToolDbEntry, ToolDbError> {
    let region = tool.graspable_region.ok_or_else(|| ToolDbError::Invalid {
        name: tool.name.clone(),
        problem: "object has no graspable region".into(),
    })?;
    let bb = tool
        .shape
        .iter()
        .fold(crate::geometry::Aabb::empty(), |acc, p| acc.union(&p.local_aabb()));
    let e = bb.extents();
    let m = margin_px as f64 * meters_per_pixel;
    let width = ((e.x + 2.0 * m) / meters_per_pixel).ceil() as u32;
    let height = ((e.y + 2.0 * m) / meters_per_pixel).ceil() as u32;
    let x0 = bb.center().x - width as f64 * meters_per_pixel * 0.5;
    let y0 = bb.center().y + height as f64 * meters_per_pixel * 0.5;
    let top = bb.max.z + 1.0;
    let local = |u: u32, v: u32| {
        Vec3::new(
            x0 + (u as f64 + 0.5) * meters_per_pixel,
            y0 - (v as f64 + 0.5) * meters_per_pixel,
            top,
        )
    };
    let down = -Vec3::z();
    let full = Mask::from_fn(width, height, |u, v| {
        let o = local(u, v);
        tool.shape.iter().any(|p| p.ray_local(&o, &down).is_some())
    });
    let grip = Mask::from_fn(width, height, |u, v| {
        let p = local(u, v);
        full.get(u, v)
            && (p.x - region.center[0]).abs() <= region.size[0] * 0.5
            && (p.y - region.center[1]).abs() <= region.size[1] * 0.5
    });
    let entry = ToolDbEntry {
        name: tool.label().to_string(),
        full,
        region: grip,
        meters_per_pixel,
    };
    entry.validate()?;
    Ok(entry)
}

/// Rasterize every database tool from the fixture catalog at 1 mm/px.
pub fn build_from_fixtures() -> ToolDb {
    let entries = crate::fixtures::DB_TOOLS
        .iter()
        .map(|label| {
            let tool = crate::fixtures::by_label(label, label, [0.0, 0.0], 0.0).expect("catalog tool");
            rasterize(&tool, 0.001, 6).expect("fixture tools rasterize")
        })
        .collect();
    ToolDb { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_matches_fresh_rasterization() {
        assert_eq!(ToolDb::bundled(), build_from_fixtures());
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let db = ToolDb::bundled();
        db.save_dir(dir.path()).unwrap();
        let back = ToolDb::load_dir(dir.path()).unwrap();
        let mut names = db.names();
        names.sort();
        assert_eq!(back.names(), names);
        for e in &back.entries {
            assert_eq!(Some(e), db.get(&e.name));
        }
    }

    #[test]
    fn scoop_template_area_matches_geometry() {
        let db = ToolDb::bundled();
        let s = db.get("scoop").unwrap();
        // handle 0.10 x 0.022 plus head 0.08 x 0.06, in square millimetres
        let expected = 100.0 * 22.0 + 80.0 * 60.0;
        assert!((s.full.count() as f64 / expected - 1.0).abs() < 0.03, "{}", s.full.count());
        let handle = 100.0 * 22.0;
        assert!((s.region.count() as f64 / handle - 1.0).abs() < 0.05, "{}", s.region.count());
    }

    #[test]
    fn region_outside_mask_is_rejected() {
        let mut e = ToolDb::bundled().entries[0].clone();
        e.region = Mask::full(e.full.width, e.full.height);
        assert!(e.validate().is_err());
    }
}
