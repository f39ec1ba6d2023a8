//! Farthest point sampling and k-nearest-neighbor grouping.
//!
//! Both are exact greedy procedures over squared Euclidean distances with a
//! fixed tie rule (lowest index wins), so results are deterministic and the
//! selected point sets depend only on geometry and the starting point.

use super::PointCloud;
use crate::error::{Error, Result};

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Greedy farthest point sampling.
///
/// The first pick is `start_index`; each subsequent pick maximizes the
/// minimum squared distance to the already-picked set, ties broken by the
/// lowest index. Returns the `m` picked indices in greedy order.
pub fn farthest_point_sampling(
    pc: &PointCloud,
    m: usize,
    start_index: usize,
) -> Result<Vec<usize>> {
    let n = pc.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "fps: m = {m} out of range for {n} points"
        )));
    }
    if start_index >= n {
        return Err(Error::InvalidArgument(format!(
            "fps: start_index {start_index} out of range for {n} points"
        )));
    }
    let points = pc.points();
    let mut picked = Vec::with_capacity(m);
    picked.push(start_index);
    // min_d2[i] tracks the squared distance from i to the picked set.
    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|p| dist2(p, &points[start_index]))
        .collect();
    while picked.len() < m {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in min_d2.iter().enumerate() {
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        picked.push(best);
        for (i, d) in min_d2.iter_mut().enumerate() {
            let nd = dist2(&points[i], &points[best]);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(picked)
}

/// For each center index, the `k` nearest point indices (the center itself
/// included), ordered by increasing distance with ties broken by the lowest
/// index.
pub fn knn_group(pc: &PointCloud, center_indices: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = pc.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "knn: k = {k} out of range for {n} points"
        )));
    }
    let points = pc.points();
    center_indices
        .iter()
        .map(|&c| {
            if c >= n {
                return Err(Error::InvalidArgument(format!(
                    "knn: center index {c} out of range for {n} points"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            let center = &points[c];
            order.sort_by(|&a, &b| {
                dist2(&points[a], center)
                    .partial_cmp(&dist2(&points[b], center))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            order.truncate(k);
            Ok(order)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_cloud(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.iter().map(|&x| [x, 0.0, 0.0]).collect()).unwrap()
    }

    // Independent O(N^2 * m) oracle: re-derives each greedy pick by scanning
    // all candidates against the full picked set.
    fn fps_oracle(pc: &PointCloud, m: usize, start: usize) -> Vec<usize> {
        let points = pc.points();
        let mut picked = vec![start];
        while picked.len() < m {
            let mut best = 0;
            let mut best_d = f64::NEG_INFINITY;
            for i in 0..points.len() {
                let d = picked
                    .iter()
                    .map(|&j| dist2(&points[i], &points[j]))
                    .fold(f64::INFINITY, f64::min);
                if d > best_d {
                    best = i;
                    best_d = d;
                }
            }
            picked.push(best);
        }
        picked
    }

    // Oracle for knn: k rounds of linear minimum scans.
    fn knn_oracle(pc: &PointCloud, center: usize, k: usize) -> Vec<usize> {
        let points = pc.points();
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < k {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for i in 0..points.len() {
                if chosen.contains(&i) {
                    continue;
                }
                let d = dist2(&points[i], &points[center]);
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            chosen.push(best);
        }
        chosen
    }

    #[test]
    fn fps_on_colinear_points_picks_the_extremes() {
        let pc = line_cloud(&[0.0, 1.0, 2.0, 3.0]);
        let picked = farthest_point_sampling(&pc, 2, 0).unwrap();
        assert_eq!(picked, vec![0, 3]);
    }

    #[test]
    fn fps_exhausts_all_points_when_m_equals_n() {
        let pc = line_cloud(&[0.0, 1.0, 2.0, 3.0]);
        let picked = farthest_point_sampling(&pc, 4, 1).unwrap();
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert_eq!(picked[0], 1);
    }

    #[test]
    fn fps_matches_brute_force_oracle() {
        let mut rng = crate::numerics::Rng::new(31);
        for _ in 0..20 {
            let n = 8 + rng.index(40);
            let points: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.uniform(), rng.uniform(), rng.uniform()])
                .collect();
            let pc = PointCloud::new(points).unwrap();
            let m = 1 + rng.index(n);
            let start = rng.index(n);
            assert_eq!(
                farthest_point_sampling(&pc, m, start).unwrap(),
                fps_oracle(&pc, m, start)
            );
        }
    }

    #[test]
    fn fps_rejects_bad_arguments() {
        let pc = line_cloud(&[0.0, 1.0]);
        assert!(farthest_point_sampling(&pc, 3, 0).is_err());
        assert!(farthest_point_sampling(&pc, 0, 0).is_err());
        assert!(farthest_point_sampling(&pc, 1, 2).is_err());
    }

    #[test]
    fn knn_with_k1_returns_the_center_itself() {
        let pc = line_cloud(&[0.0, 1.0, 2.0]);
        let groups = knn_group(&pc, &[0, 1, 2], 1).unwrap();
        assert_eq!(groups, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn knn_prefers_the_nearer_endpoint() {
        // Unevenly spaced line: the middle point is nearer to index 0.
        let pc = line_cloud(&[0.0, 1.0, 3.0]);
        let groups = knn_group(&pc, &[1], 2).unwrap();
        assert_eq!(groups[0], vec![1, 0]);
    }

    #[test]
    fn knn_matches_full_sort_oracle() {
        let mut rng = crate::numerics::Rng::new(77);
        for _ in 0..20 {
            let n = 4 + rng.index(40);
            let points: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.uniform(), rng.uniform(), rng.uniform()])
                .collect();
            let pc = PointCloud::new(points).unwrap();
            let k = 1 + rng.index(n);
            let center = rng.index(n);
            let got = knn_group(&pc, &[center], k).unwrap();
            assert_eq!(got[0], knn_oracle(&pc, center, k));
        }
    }

    #[test]
    fn knn_rejects_k_beyond_n() {
        let pc = line_cloud(&[0.0, 1.0]);
        assert!(knn_group(&pc, &[0], 3).is_err());
    }
}
