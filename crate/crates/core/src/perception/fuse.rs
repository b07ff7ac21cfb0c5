//! Cross-view association, logit aggregation, denoising and box extraction.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;
use std::num::NonZero;

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use serde::{Deserialize, Serialize};

use super::detect::PartialCloud;
use super::PerceptionError;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    /// Single-linkage threshold on partial-cloud centroid distance, meters.
    pub tau_assoc: f64,
    pub denoise_k: usize,
    /// Outlier cutoff in standard deviations above the mean neighbor distance.
    pub denoise_std: f64,
    /// Voxel edge for the centroid estimate, meters; 0 uses every point.
    #[serde(default = "default_voxel")]
    pub voxel_m: f64,
}

fn default_voxel() -> f64 {
    0.002
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            tau_assoc: 0.05,
            denoise_k: 16,
            denoise_std: 2.0,
            voxel_m: default_voxel(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contributor {
    pub camera_id: String,
    pub mask_index: usize,
    pub logit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedObject {
    pub label: String,
    /// Denoised merged cloud.
    pub cloud: Vec<Vec3>,
    pub logit: f64,
    pub centroid: Vec3,
    /// Axis-aligned extents (L, W, H) along base x, y, z.
    pub dims: Vec3,
    pub contributors: Vec<Contributor>,
}

/// Aggregate logit of a fused object.
pub fn aggregate_logit(logits: &[f64]) -> f64 {
    logits.iter().sum()
}

fn canonical_cmp(a: &PartialCloud, b: &PartialCloud) -> Ordering {
    let (ca, cb) = (a.centroid(), b.centroid());
    a.camera_id
        .cmp(&b.camera_id)
        .then(a.mask_index.cmp(&b.mask_index))
        .then(a.label.cmp(&b.label))
        .then(a.logit.total_cmp(&b.logit))
        .then(ca.x.total_cmp(&cb.x))
        .then(ca.y.total_cmp(&cb.y))
        .then(ca.z.total_cmp(&cb.z))
        .then(a.points.len().cmp(&b.points.len()))
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clusters of cloud indices, each sorted, clusters ordered
/// by their first member.
pub fn cluster(centroids: &[Vec3], tau: f64) -> Vec<Vec<usize>> {
    let n = centroids.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if (centroids[i] - centroids[j]).norm() <= tau {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Cluster partial clouds and reduce each cluster to a fused object. The
/// result does not depend on the order of `clouds`.
pub fn fuse(clouds: &[PartialCloud], cfg: &FusionConfig) -> Vec<FusedObject> {
    let mut sorted: Vec<&PartialCloud> = clouds.iter().collect();
    sorted.sort_by(|a, b| canonical_cmp(a, b));
    let centroids: Vec<Vec3> = sorted.iter().map(|c| c.centroid()).collect();
    cluster(&centroids, cfg.tau_assoc)
        .into_iter()
        .map(|members| {
            let parts: Vec<&PartialCloud> = members.iter().map(|i| sorted[*i]).collect();
            let best = parts
                .iter()
                .copied()
                .reduce(|a, b| if b.logit > a.logit { b } else { a })
                .expect("clusters are non-empty");
            let raw: Vec<Vec3> = parts.iter().flat_map(|p| p.points.iter().copied()).collect();
            let (cloud, _) = denoise(&raw, cfg.denoise_k, cfg.denoise_std);
            let (_, dims) = extract_geometry(&cloud).expect("non-empty cloud");
            let (centroid, _) = extract_geometry(&voxel_downsample(&cloud, cfg.voxel_m)).expect("non-empty cloud");
            FusedObject {
                label: best.label.clone(),
                cloud,
                logit: aggregate_logit(&parts.iter().map(|p| p.logit).collect::<Vec<_>>()),
                centroid,
                dims,
                contributors: parts
                    .iter()
                    .map(|p| Contributor {
                        camera_id: p.camera_id.clone(),
                        mask_index: p.mask_index,
                        logit: p.logit,
                    })
                    .collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TooFewPoints {
    pub points: usize,
    pub required: usize,
}

/// Statistical outlier removal: drop points whose mean distance to their k
/// nearest neighbors exceeds the global mean by more than `std_ratio`
/// standard deviations. Clouds with at most k points come back unchanged
/// with a warning.
pub fn denoise(points: &[Vec3], k: usize, std_ratio: f64) -> (Vec<Vec3>, Option<TooFewPoints>) {
    if points.len() < k + 1 || k == 0 {
        if k > 0 {
            log::warn!("denoise skipped: {} points, need {}", points.len(), k + 1);
        }
        return (
            points.to_vec(),
            Some(TooFewPoints {
                points: points.len(),
                required: k + 1,
            }),
        );
    }
    let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, u64, 3, 32> = ImmutableKdTree::new_from_slice(&raw);
    let qty = NonZero::new(k + 1).expect("k + 1 > 0");
    let mean_d: Vec<f64> = raw
        .iter()
        .map(|q| {
            let nn = tree.nearest_n::<SquaredEuclidean>(q, qty);
            // the query point itself is among the results at distance 0
            let sum: f64 = nn.iter().map(|n| n.distance.sqrt()).sum();
            sum / k as f64
        })
        .collect();
    let n = mean_d.len() as f64;
    let mu = mean_d.iter().sum::<f64>() / n;
    let var = mean_d.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n;
    let cutoff = mu + std_ratio * var.sqrt();
    let kept = points
        .iter()
        .zip(&mean_d)
        .filter(|(_, d)| **d <= cutoff)
        .map(|(p, _)| *p)
        .collect();
    (kept, None)
}

/// One point per occupied voxel: the mean of the points inside it, in
/// voxel-index order. Overlapping views then count once per voxel.
pub fn voxel_downsample(points: &[Vec3], size: f64) -> Vec<Vec3> {
    if size <= 0.0 {
        return points.to_vec();
    }
    let mut cells: BTreeMap<[i64; 3], (Vec3, usize)> = BTreeMap::new();
    for p in points {
        let key = [p.x, p.y, p.z].map(|c| (c / size).floor() as i64);
        let e = cells.entry(key).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    cells.into_values().map(|(sum, n)| sum / n as f64).collect()
}

/// Mean point and axis-aligned extents.
pub fn extract_geometry(points: &[Vec3]) -> Result<(Vec3, Vec3), PerceptionError> {
    if points.is_empty() {
        return Err(PerceptionError::EmptyCloud {
            label: String::new(),
            camera: String::new(),
        });
    }
    let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    Ok((centroid, hi - lo))
}

/// Plain-text dump: one "x y z" line per point.
pub fn dump_cloud(points: &[Vec3], out: &mut impl Write) -> std::io::Result<()> {
    for p in points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(cam: &str, center: Vec3, logit: f64) -> PartialCloud {
        let points = (0..30)
            .map(|i| center + Vec3::new((i % 5) as f64 * 0.002, (i / 5) as f64 * 0.002, 0.0))
            .collect();
        PartialCloud {
            points,
            logit,
            camera_id: cam.into(),
            mask_index: 0,
            label: "cube".into(),
        }
    }

    #[test]
    fn singleton_passes_through() {
        let c = cloud("1", Vec3::new(0.5, 0.0, 0.02), 0.8);
        let f = fuse(std::slice::from_ref(&c), &FusionConfig { denoise_k: 0, ..Default::default() });
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].cloud, c.points);
        assert_eq!(f[0].logit, 0.8);
    }

    #[test]
    fn nearby_views_merge_and_sum() {
        let a = cloud("1", Vec3::new(0.5, 0.0, 0.02), 0.8);
        let b = cloud("3", Vec3::new(0.508, 0.0, 0.02), 0.7);
        let f = fuse(&[a, b], &FusionConfig::default());
        assert_eq!(f.len(), 1);
        assert!((f[0].logit - 1.5).abs() < 1e-12);
    }

    #[test]
    fn distant_objects_stay_apart() {
        let a = cloud("1", Vec3::new(0.5, 0.0, 0.02), 0.8);
        let b = cloud("1", Vec3::new(0.5, 0.2, 0.02), 0.8);
        assert_eq!(fuse(&[a, b], &FusionConfig::default()).len(), 2);
    }

    #[test]
    fn gross_outlier_removed() {
        let mut pts: Vec<Vec3> = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    pts.push(Vec3::new(i as f64, j as f64, k as f64) * 0.004);
                }
            }
        }
        pts.push(Vec3::new(1.0, 1.0, 1.0));
        let (kept, warn) = denoise(&pts, 16, 2.0);
        assert!(warn.is_none());
        assert!(!kept.contains(&Vec3::new(1.0, 1.0, 1.0)));
        assert!(kept.len() >= 1000 - 10);
    }

    #[test]
    fn few_points_unchanged_with_warning() {
        let pts: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let (kept, warn) = denoise(&pts, 16, 2.0);
        assert_eq!(kept, pts);
        assert_eq!(warn, Some(TooFewPoints { points: 5, required: 17 }));
    }

    #[test]
    fn voxels_weigh_regions_equally() {
        // a dense patch and a sparse patch of equal area
        let mut pts: Vec<Vec3> = (0..100).map(|i| Vec3::new((i % 10) as f64 * 0.001, (i / 10) as f64 * 0.001, 0.0)).collect();
        pts.push(Vec3::new(0.1, 0.0, 0.0));
        let v = voxel_downsample(&pts, 0.01);
        assert_eq!(v.len(), 2);
        let (c, _) = extract_geometry(&v).unwrap();
        assert!((c.x - (0.0045 + 0.1) / 2.0).abs() < 1e-12);
        assert_eq!(voxel_downsample(&pts, 0.0), pts);
    }

    #[test]
    fn geometry_arithmetic() {
        let (c, d) = extract_geometry(&[Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0)]).unwrap();
        assert_eq!(c, Vec3::new(0.05, 0.0, 0.0));
        assert_eq!(d, Vec3::new(0.1, 0.0, 0.0));
        let p = Vec3::new(0.3, 0.2, 0.1);
        assert_eq!(extract_geometry(&[p]).unwrap(), (p, Vec3::zeros()));
        assert!(extract_geometry(&[]).is_err());
    }
}
