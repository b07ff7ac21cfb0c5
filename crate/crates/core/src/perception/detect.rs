//! Simulated grounded detector and mask deprojection.

use serde::{Deserialize, Serialize};

use super::image::Mask;
use super::render::View;
use super::PerceptionError;
use crate::geometry::Vec3;
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Detections scoring below this are dropped.
    pub theta_conf: f64,
    /// Logit of a fully visible object.
    pub base_logit: f64,
    /// Probability that a cage camera misses an object outright.
    #[serde(default)]
    pub miss_rate: f64,
    /// Probability that a query is answered with its confusable partner.
    #[serde(default)]
    pub confusion_rate: f64,
    #[serde(default)]
    pub confusion: Vec<[String; 2]>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            theta_conf: 0.35,
            base_logit: 0.9,
            miss_rate: 0.0,
            confusion_rate: 0.0,
            confusion: vec![["scoop".into(), "spatula".into()]],
        }
    }
}

impl DetectorConfig {
    pub fn partner(&self, label: &str) -> Option<&str> {
        self.confusion.iter().find_map(|[a, b]| {
            if a == label {
                Some(b.as_str())
            } else if b == label {
                Some(a.as_str())
            } else {
                None
            }
        })
    }

    /// Ground-truth label that answers `query` in this trial. The draw is
    /// keyed by the query alone so every camera is confused the same way.
    pub fn resolve_query<'a>(&'a self, query: &'a str, seed: u64) -> &'a str {
        match self.partner(query) {
            Some(p) if self.confusion_rate > 0.0 && seeding::unit_draw(seed, &["confusion", query]) < self.confusion_rate => p,
            _ => query,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub mask: Mask,
    pub logit: f64,
    /// The queried label, which is what the detector reports.
    pub label: String,
    pub camera_id: String,
    /// Ground-truth object behind the mask; simulation bookkeeping only.
    pub source: String,
}

pub fn logit_for(cfg: &DetectorConfig, visible_fraction: f64) -> f64 {
    cfg.base_logit * visible_fraction
}

pub fn detect(view: &View, query: &str, cfg: &DetectorConfig, seed: u64) -> Vec<Detection> {
    let target = cfg.resolve_query(query, seed);
    let cam = &view.camera;
    let k = cam.intrinsics;
    let mut out = Vec::new();
    for (i, obj) in view.objects.iter().enumerate() {
        if obj.label != target || obj.visible_pixels == 0 {
            continue;
        }
        if !cam.is_wrist()
            && cfg.miss_rate > 0.0
            && seeding::unit_draw(seed, &["miss", &cam.id, &obj.name]) < cfg.miss_rate
        {
            continue;
        }
        let logit = logit_for(cfg, view.visible_fraction(i));
        if logit < cfg.theta_conf {
            continue;
        }
        let mask = Mask {
            width: k.width,
            height: k.height,
            data: view.ids.iter().map(|id| *id == i as i32).collect(),
        };
        out.push(Detection {
            mask,
            logit,
            label: query.to_string(),
            camera_id: cam.id.clone(),
            source: obj.name.clone(),
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialCloud {
    pub points: Vec<Vec3>,
    pub logit: f64,
    pub camera_id: String,
    /// Position of the detection within its camera's detection list.
    pub mask_index: usize,
    pub label: String,
}

impl PartialCloud {
    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len().max(1) as f64
    }
}

pub fn deproject(
    det: &Detection,
    depth: &super::image::DepthImage,
    cam: &super::camera::CameraModel,
    mask_index: usize,
) -> Result<PartialCloud, PerceptionError> {
    let k = cam.intrinsics;
    if det.mask.width != k.width || det.mask.height != k.height || depth.width != k.width || depth.height != k.height {
        return Err(PerceptionError::SizeMismatch);
    }
    let points: Vec<Vec3> = det
        .mask
        .pixels()
        .filter_map(|(u, v)| {
            let d = depth.get(u, v);
            (d > 0.0).then(|| cam.deproject(u as f64, v as f64, d))
        })
        .collect();
    if points.is_empty() {
        return Err(PerceptionError::EmptyCloud {
            label: det.label.clone(),
            camera: det.camera_id.clone(),
        });
    }
    Ok(PartialCloud {
        points,
        logit: det.logit,
        camera_id: det.camera_id.clone(),
        mask_index,
        label: det.label.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::camera::{CameraModel, Intrinsics};
    use crate::perception::image::DepthImage;
    use nalgebra::Isometry3;

    fn ident_cam() -> CameraModel {
        CameraModel {
            id: "1".into(),
            intrinsics: Intrinsics::centered(5, 5, 100.0),
            extrinsics: Isometry3::identity(),
        }
    }

    fn det(mask: Mask) -> Detection {
        Detection {
            mask,
            logit: 0.9,
            label: "cube".into(),
            camera_id: "1".into(),
            source: "cube".into(),
        }
    }

    #[test]
    fn principal_pixel_deprojects_on_axis() {
        let cam = ident_cam();
        let mut depth = DepthImage::zeros(5, 5);
        depth.data[2 * 5 + 2] = 1.0;
        let m = Mask::from_fn(5, 5, |u, v| u == 2 && v == 2);
        let pc = deproject(&det(m), &depth, &cam, 0).unwrap();
        assert_eq!(pc.points, vec![Vec3::new(0.0, 0.0, 1.0)]);
    }

    #[test]
    fn all_zero_depth_is_an_error() {
        let cam = ident_cam();
        let depth = DepthImage::zeros(5, 5);
        let e = deproject(&det(Mask::full(5, 5)), &depth, &cam, 0);
        assert!(matches!(e, Err(PerceptionError::EmptyCloud { .. })));
    }

    #[test]
    fn confusion_partner_lookup() {
        let mut cfg = DetectorConfig::default();
        assert_eq!(cfg.partner("spatula"), Some("scoop"));
        assert_eq!(cfg.resolve_query("scoop", 1), "scoop");
        cfg.confusion_rate = 1.0;
        assert_eq!(cfg.resolve_query("scoop", 1), "spatula");
        assert_eq!(cfg.resolve_query("tomato", 1), "tomato");
    }
}
