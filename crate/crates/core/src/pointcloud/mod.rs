//! Point-cloud data model, synthetic dataset generation, augmentation,
//! geometric sampling/grouping, dataset splits and bagging samplers, and
//! file I/O.

mod dataset;
mod sampling;
mod shapes;

pub use dataset::{
    generate_dataset, make_split, make_split_indices, read_dataset, write_dataset, BagMode,
    BaggingSpec, GenSpec, LabeledDataset, SplitIndices,
};
pub use sampling::{farthest_point_sampling, knn_group};
pub use shapes::{generate_shape, ShapeKind};

use crate::error::{Error, Result};
use crate::numerics::Rng;

/// An unordered set of `N >= 1` finite 3D points, the unit of classification.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty point cloud".into()));
        }
        if let Some(p) = points
            .iter()
            .find(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::NonFinite(format!("point {p:?}")));
        }
        Ok(PointCloud { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // N >= 1 by construction
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn centroid(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        let n = self.points.len() as f64;
        [c[0] / n, c[1] / n, c[2] / n]
    }

    /// Canonical unit-sphere framing: centroid moved to the origin, then
    /// scaled so the farthest point has norm 1. A degenerate all-equal cloud
    /// collapses to all-zero points.
    pub fn normalize(&self) -> PointCloud {
        let c = self.centroid();
        let centered: Vec<[f64; 3]> = self
            .points
            .iter()
            .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
            .collect();
        let max_norm = centered
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(0.0f64, f64::max);
        if max_norm < 1e-15 {
            return PointCloud {
                points: vec![[0.0; 3]; self.points.len()],
            };
        }
        PointCloud {
            points: centered
                .into_iter()
                .map(|p| [p[0] / max_norm, p[1] / max_norm, p[2] / max_norm])
                .collect(),
        }
    }

    /// Reorders points by a permutation (`perm[i]` is the source index of
    /// output point `i`).
    pub fn permuted(&self, perm: &[usize]) -> Result<PointCloud> {
        if perm.len() != self.points.len() {
            return Err(Error::InvalidArgument("permutation length".into()));
        }
        let points = perm.iter().map(|&i| self.points[i]).collect();
        PointCloud::new(points)
    }
}

/// Rotation about the vertical (z) axis by `angle`, then per-point offsets.
/// This is the deterministic core of [`augment`]; tests drive it directly.
pub fn augment_with(pc: &PointCloud, angle: f64, jitter: &[[f64; 3]]) -> Result<PointCloud> {
    if jitter.len() != pc.len() {
        return Err(Error::ShapeMismatch("jitter length vs cloud".into()));
    }
    let (sin, cos) = angle.sin_cos();
    let points = pc
        .points()
        .iter()
        .zip(jitter)
        .map(|(p, j)| {
            [
                cos * p[0] - sin * p[1] + j[0],
                sin * p[0] + cos * p[1] + j[1],
                p[2] + j[2],
            ]
        })
        .collect();
    PointCloud::new(points)
}

/// Jitter standard deviation used by [`augment`].
pub const JITTER_SIGMA: f64 = 0.01;
/// Per-coordinate jitter clip used by [`augment`].
pub const JITTER_CLIP: f64 = 0.05;

/// Random rotation about the vertical axis (uniform angle) plus per-point
/// Gaussian jitter (sigma 0.01, clipped at 0.05 per coordinate).
/// Deterministic given the generator state; draws the angle first, then
/// jitter per point in storage order (x, y, z).
pub fn augment(pc: &PointCloud, rng: &mut Rng) -> PointCloud {
    let angle = rng.uniform() * std::f64::consts::TAU;
    let jitter: Vec<[f64; 3]> = (0..pc.len())
        .map(|_| {
            let mut j = [0.0; 3];
            for slot in &mut j {
                *slot = (rng.normal() * JITTER_SIGMA).clamp(-JITTER_CLIP, JITTER_CLIP);
            }
            j
        })
        .collect();
    augment_with(pc, angle, &jitter).expect("jitter generated with matching length")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(p: &[f64; 3]) -> f64 {
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
    }

    #[test]
    fn normalize_centers_and_scales() {
        let pc = PointCloud::new(vec![[1.0, 2.0, 3.0], [3.0, 2.0, 1.0], [5.0, 0.0, 2.0]]).unwrap();
        let n = pc.normalize();
        let c = n.centroid();
        assert!(norm(&c) < 1e-9);
        let max = n.points().iter().map(norm).fold(0.0f64, f64::max);
        assert!((max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_is_idempotent() {
        let pc = PointCloud::new(vec![[0.2, -0.4, 0.9], [-0.1, 0.5, -0.3], [0.7, 0.7, 0.0]])
            .unwrap();
        let once = pc.normalize();
        let twice = once.normalize();
        for (a, b) in once.points().iter().zip(twice.points()) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalize_collapses_repeated_point() {
        let pc = PointCloud::new(vec![[2.0, 2.0, 2.0]; 5]).unwrap();
        let n = pc.normalize();
        assert!(n.points().iter().all(|p| *p == [0.0, 0.0, 0.0]));
    }

    #[test]
    fn normalize_ignores_translation() {
        let base = vec![[0.1, 0.2, 0.3], [-0.5, 0.4, 0.0], [0.9, -0.2, 0.7]];
        let shifted: Vec<[f64; 3]> = base
            .iter()
            .map(|p| [p[0] + 10.0, p[1] - 3.0, p[2] + 0.5])
            .collect();
        let a = PointCloud::new(base).unwrap().normalize();
        let b = PointCloud::new(shifted).unwrap().normalize();
        for (pa, pb) in a.points().iter().zip(b.points()) {
            for k in 0..3 {
                assert!((pa[k] - pb[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn augment_identity_when_angle_and_jitter_vanish() {
        let pc = PointCloud::new(vec![[0.3, 0.4, 0.5], [-0.1, 0.0, 0.2]]).unwrap();
        let out = augment_with(&pc, 0.0, &[[0.0; 3]; 2]).unwrap();
        assert_eq!(out, pc);
    }

    #[test]
    fn augment_half_turn_negates_x() {
        let pc = PointCloud::new(vec![[1.0, 0.0, 0.0]]).unwrap();
        let out = augment_with(&pc, std::f64::consts::PI, &[[0.0; 3]]).unwrap();
        let p = out.points()[0];
        assert!((p[0] + 1.0).abs() < 1e-12);
        assert!(p[1].abs() < 1e-12);
        assert!(p[2].abs() < 1e-12);
    }

    #[test]
    fn augment_is_deterministic_per_seed() {
        let pc = PointCloud::new(vec![[0.3, 0.4, 0.5], [-0.1, 0.0, 0.2]]).unwrap();
        let a = augment(&pc, &mut Rng::new(11));
        let b = augment(&pc, &mut Rng::new(11));
        assert_eq!(a, b);
    }
}
