//! Similarity registration of a database mask onto a query mask.

use serde::{Deserialize, Serialize};

use crate::perception::image::Mask;

/// Maps database pixel `p` to query pixel `scale * R(rotation) * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskAlignment {
    pub translation: [f64; 2],
    pub rotation_deg: f64,
    pub scale: f64,
    pub iou: f64,
}

impl MaskAlignment {
    pub fn identity() -> Self {
        MaskAlignment {
            translation: [0.0, 0.0],
            rotation_deg: 0.0,
            scale: 1.0,
            iou: 1.0,
        }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        [
            self.scale * (c * p[0] - s * p[1]) + self.translation[0],
            self.scale * (s * p[0] + c * p[1]) + self.translation[1],
        ]
    }

    pub fn invert(&self, q: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let x = (q[0] - self.translation[0]) / self.scale;
        let y = (q[1] - self.translation[1]) / self.scale;
        [c * x + s * y, -s * x + c * y]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("mask has no spatial extent")]
    Degenerate,
    #[error("best alignment IoU {iou:.3} below {min:.2}")]
    LowOverlap { iou: f64, min: f64 },
    #[error("scale {found:.3} disagrees with the expected {expected:.3}")]
    ScaleMismatch { found: f64, expected: f64 },
}

/// Area, centroid and central second moments of a mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub area: f64,
    pub centroid: [f64; 2],
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
}

impl Moments {
    pub fn of(mask: &Mask) -> Option<Self> {
        let (mut n, mut su, mut sv) = (0.0, 0.0, 0.0);
        for (u, v) in mask.pixels() {
            n += 1.0;
            su += u as f64;
            sv += v as f64;
        }
        if n == 0.0 {
            return None;
        }
        let c = [su / n, sv / n];
        let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
        for (u, v) in mask.pixels() {
            let x = u as f64 - c[0];
            let y = v as f64 - c[1];
            a += x * x;
            b += y * y;
            d += x * y;
        }
        Some(Moments {
            area: n,
            centroid: c,
            mu20: a / n,
            mu02: b / n,
            mu11: d / n,
        })
    }

    /// Major-axis angle in image coordinates, degrees.
    pub fn orientation_deg(&self) -> f64 {
        0.5 * (2.0 * self.mu11).atan2(self.mu20 - self.mu02).to_degrees()
    }

    /// 0 for rotationally ambiguous shapes, 1 for a line.
    pub fn anisotropy(&self) -> f64 {
        let t = self.mu20 + self.mu02;
        if t <= 0.0 {
            return 0.0;
        }
        ((self.mu20 - self.mu02).powi(2) + 4.0 * self.mu11 * self.mu11).sqrt() / t
    }
}

/// Below this anisotropy the principal axis is unreliable and the rotation
/// is found by exhaustive search instead.
const ISOTROPIC: f64 = 0.1;

/// Resample `src` into a `width` x `height` frame through `t`.
pub fn warp(src: &Mask, t: &MaskAlignment, width: u32, height: u32) -> Mask {
    // bounding box of the source corners in the target frame
    let (sw, sh) = (src.width as f64, src.height as f64);
    let corners = [[-0.5, -0.5], [sw, -0.5], [-0.5, sh], [sw, sh]].map(|p| t.apply(p));
    let lo = |i: usize| corners.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min).floor().max(0.0) as u32;
    let hi = |i: usize, lim: u32| {
        corners
            .iter()
            .map(|c| c[i])
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil()
            .min(lim as f64 - 1.0)
    };
    let mut out = Mask::empty(width, height);
    let (u1, v1) = (hi(0, width), hi(1, height));
    if u1 < 0.0 || v1 < 0.0 {
        return out;
    }
    for v in lo(1)..=v1 as u32 {
        for u in lo(0)..=u1 as u32 {
            let p = t.invert([u as f64, v as f64]);
            if src.get_signed(p[0].round() as i64, p[1].round() as i64) {
                out.set(u, v, true);
            }
        }
    }
    out
}

fn candidate(db: &Moments, q: &Moments, rotation_deg: f64, scale: f64) -> MaskAlignment {
    let mut t = MaskAlignment {
        translation: [0.0, 0.0],
        rotation_deg,
        scale,
        iou: 0.0,
    };
    let moved = t.apply(db.centroid);
    t.translation = [q.centroid[0] - moved[0], q.centroid[1] - moved[1]];
    t
}

fn scored(db: &Mask, query: &Mask, mut t: MaskAlignment) -> MaskAlignment {
    t.iou = warp(db, &t, query.width, query.height).iou(query);
    t
}

/// Register `db` onto `query` from image moments: centroids matched, major
/// axes aligned, scale from the square root of the area ratio. Both axis
/// directions are tried and the one with the larger overlap kept. When
/// `expected_scale` is given the moment scale must agree within 30 %.
pub fn align_masks(db: &Mask, query: &Mask, expected_scale: Option<f64>, min_iou: f64) -> Result<MaskAlignment, AlignError> {
    let (Some(md), Some(mq)) = (Moments::of(db), Moments::of(query)) else {
        return Err(AlignError::Degenerate);
    };
    if md.mu20 + md.mu02 <= 0.0 || mq.mu20 + mq.mu02 <= 0.0 {
        return Err(AlignError::Degenerate);
    }
    let scale = (mq.area / md.area).sqrt();
    if let Some(expected) = expected_scale {
        if (scale / expected - 1.0).abs() > 0.3 {
            return Err(AlignError::ScaleMismatch { found: scale, expected });
        }
    }
    let rotations: Vec<f64> = if md.anisotropy() < ISOTROPIC || mq.anisotropy() < ISOTROPIC {
        (0..360).map(f64::from).collect()
    } else {
        let base = mq.orientation_deg() - md.orientation_deg();
        vec![base, base + 180.0]
    };
    let best = rotations
        .into_iter()
        .map(|r| scored(db, query, candidate(&md, &mq, crate::geometry::normalize_deg(r), scale)))
        .reduce(|a, b| if b.iou > a.iou { b } else { a })
        .expect("at least one rotation");
    if best.iou < min_iou {
        return Err(AlignError::LowOverlap { iou: best.iou, min: min_iou });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hammer_like() -> Mask {
        Mask::from_fn(80, 50, |u, v| ((10..60).contains(&u) && (20..30).contains(&v)) || ((60..72).contains(&u) && (5..45).contains(&v)))
    }

    #[test]
    fn identity_is_recovered_exactly() {
        let m = hammer_like();
        let t = align_masks(&m, &m, None, 0.5).unwrap();
        assert!(t.rotation_deg.abs() < 1e-9);
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.translation[0].abs() < 1e-9 && t.translation[1].abs() < 1e-9);
        assert_eq!(t.iou, 1.0);
    }

    #[test]
    fn rotated_copy_is_recovered() {
        let m = hammer_like();
        let truth = MaskAlignment {
            translation: [90.0, 20.0],
            rotation_deg: 30.0,
            scale: 1.2,
            iou: 1.0,
        };
        let q = warp(&m, &truth, 220, 180);
        let t = align_masks(&m, &q, None, 0.5).unwrap();
        assert!(t.iou >= 0.9, "{}", t.iou);
        assert!((t.rotation_deg - 30.0).abs() < 3.0, "{}", t.rotation_deg);
        assert!((t.scale - 1.2).abs() < 0.036);
        let c = [40.0, 25.0];
        let (a, b) = (t.apply(c), truth.apply(c));
        assert!(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() < 2.0);
    }

    #[test]
    fn disc_does_not_match_hammer() {
        let disc = Mask::from_fn(80, 80, |u, v| (u as f64 - 40.0).powi(2) + (v as f64 - 40.0).powi(2) < 400.0);
        let err = align_masks(&hammer_like(), &disc, None, 0.5).unwrap_err();
        assert!(matches!(err, AlignError::LowOverlap { .. }), "{err:?}");
    }

    #[test]
    fn degenerate_masks_fail() {
        let dot = Mask::from_fn(10, 10, |u, v| u == 3 && v == 3);
        assert_eq!(align_masks(&hammer_like(), &dot, None, 0.5), Err(AlignError::Degenerate));
        assert_eq!(align_masks(&Mask::empty(5, 5), &dot, None, 0.5), Err(AlignError::Degenerate));
    }

    #[test]
    fn inverse_undoes_apply() {
        let t = MaskAlignment {
            translation: [3.0, -7.0],
            rotation_deg: -112.0,
            scale: 0.8,
            iou: 0.0,
        };
        let p = [12.5, -4.25];
        let q = t.invert(t.apply(p));
        assert!((q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12);
    }
}
