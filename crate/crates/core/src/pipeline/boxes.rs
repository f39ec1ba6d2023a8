//! Oriented 3D boxes, rotated-rectangle IoU, and the toy detection metric.

use crate::error::{Error, Result};

use std::f64::consts::PI;

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let wrapped = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can land exactly on the excluded upper bound.
    if wrapped >= PI {
        -PI
    } else {
        wrapped
    }
}

/// An amodal oriented box: center, positive extents, and a heading angle
/// about the vertical axis, wrapped to `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    center: [f64; 3],
    size: [f64; 3],
    heading: f64,
}

impl Box3D {
    pub fn new(center: [f64; 3], size: [f64; 3], heading: f64) -> Result<Box3D> {
        if center.iter().any(|c| !c.is_finite()) || !heading.is_finite() {
            return Err(Error::NonFinite(format!("box pose {center:?}, {heading}")));
        }
        if size.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box extents must be positive, got {size:?}"
            )));
        }
        Ok(Box3D {
            center,
            size,
            heading: wrap_angle(heading),
        })
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    pub fn size(&self) -> [f64; 3] {
        self.size
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    /// The box moved by `t` (used to carry a centered-frame box back to the
    /// global frame).
    pub fn translated(&self, t: [f64; 3]) -> Box3D {
        Box3D {
            center: [
                self.center[0] + t[0],
                self.center[1] + t[1],
                self.center[2] + t[2],
            ],
            size: self.size,
            heading: self.heading,
        }
    }

    /// Bird's-eye-view corners in counterclockwise order.
    fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (sin, cos) = self.heading.sin_cos();
        let (hx, hy) = (self.size[0] / 2.0, self.size[1] / 2.0);
        let local = [[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]];
        local.map(|[x, y]| {
            [
                self.center[0] + cos * x - sin * y,
                self.center[1] + sin * x + cos * y,
            ]
        })
    }

    /// True if the point lies inside (or on) the box.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let (sin, cos) = self.heading.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let dz = p[2] - self.center[2];
        let local_x = cos * dx + sin * dy;
        let local_y = -sin * dx + cos * dy;
        local_x.abs() <= self.size[0] / 2.0
            && local_y.abs() <= self.size[1] / 2.0
            && dz.abs() <= self.size[2] / 2.0
    }
}

/// IoU flavor: 2D bird's-eye view or full volumetric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IouMode {
    Ground,
    Full3d,
}

impl IouMode {
    pub fn name(&self) -> &'static str {
        match self {
            IouMode::Ground => "ground",
            IouMode::Full3d => "full3d",
        }
    }
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        acc += poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1];
    }
    acc.abs() / 2.0
}

/// Sutherland-Hodgman clip of a convex subject polygon by a convex clip
/// polygon given in counterclockwise order.
fn clip_polygon(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let inside = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0;
        let intersect = |p: [f64; 2], q: [f64; 2]| -> [f64; 2] {
            let edge = [b[0] - a[0], b[1] - a[1]];
            let dir = [q[0] - p[0], q[1] - p[1]];
            let denom = edge[0] * dir[1] - edge[1] * dir[0];
            let t = (edge[0] * (a[1] - p[1]) - edge[1] * (a[0] - p[0])) / denom;
            [p[0] + t * dir[0], p[1] + t * dir[1]]
        };
        let input = std::mem::take(&mut output);
        for k in 0..input.len() {
            let current = input[k];
            let previous = input[(k + input.len() - 1) % input.len()];
            match (inside(current), inside(previous)) {
                (true, true) => output.push(current),
                (true, false) => {
                    output.push(intersect(previous, current));
                    output.push(current);
                }
                (false, true) => output.push(intersect(previous, current)),
                (false, false) => {}
            }
        }
    }
    output
}

/// Bird's-eye-view intersection area of two boxes.
fn bev_intersection(a: &Box3D, b: &Box3D) -> f64 {
    let clipped = clip_polygon(&a.bev_corners(), &b.bev_corners());
    polygon_area(&clipped)
}

/// Intersection over union of two oriented boxes.
///
/// `Ground` uses the rotated bird's-eye-view rectangles; `Full3d` multiplies
/// the BEV intersection by the vertical overlap. Both are bounded in
/// `[0, 1]`, symmetric, and equal to 1 exactly for identical boxes.
pub fn iou(a: &Box3D, b: &Box3D, mode: IouMode) -> Result<f64> {
    if a.size.iter().chain(b.size.iter()).any(|&s| s <= 0.0) {
        return Err(Error::InvalidArgument("degenerate zero-extent box".into()));
    }
    let inter_bev = bev_intersection(a, b);
    let value = match mode {
        IouMode::Ground => {
            let area_a = a.size[0] * a.size[1];
            let area_b = b.size[0] * b.size[1];
            inter_bev / (area_a + area_b - inter_bev)
        }
        IouMode::Full3d => {
            let top = (a.center[2] + a.size[2] / 2.0).min(b.center[2] + b.size[2] / 2.0);
            let bottom = (a.center[2] - a.size[2] / 2.0).max(b.center[2] - b.size[2] / 2.0);
            let overlap_z = (top - bottom).max(0.0);
            let inter = inter_bev * overlap_z;
            inter / (a.volume() + b.volume() - inter)
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Toy detection metric: one predicted box per scene, a detection counts as
/// correct when its IoU with the ground truth reaches the threshold. Returns
/// the fraction correct.
pub fn average_precision(
    predictions: &[Box3D],
    ground_truth: &[Box3D],
    iou_threshold: f64,
    mode: IouMode,
) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != ground_truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions vs {} ground-truth boxes",
            predictions.len(),
            ground_truth.len()
        )));
    }
    let mut correct = 0usize;
    for (p, g) in predictions.iter().zip(ground_truth) {
        if iou(p, g, mode)? >= iou_threshold {
            correct += 1;
        }
    }
    Ok(correct as f64 / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn unit_cube_at(x: f64) -> Box3D {
        Box3D::new([x, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0).unwrap()
    }

    #[test]
    fn identical_boxes_have_iou_one() {
        let b = Box3D::new([0.3, -0.2, 0.5], [1.2, 0.8, 0.6], 0.7).unwrap();
        for mode in [IouMode::Ground, IouMode::Full3d] {
            let v = iou(&b, &b, mode).unwrap();
            assert!((v - 1.0).abs() < 1e-9, "{mode:?}: {v}");
        }
    }

    #[test]
    fn disjoint_boxes_have_iou_zero() {
        let a = unit_cube_at(0.0);
        let b = unit_cube_at(5.0);
        assert_eq!(iou(&a, &b, IouMode::Ground).unwrap(), 0.0);
        assert_eq!(iou(&a, &b, IouMode::Full3d).unwrap(), 0.0);
    }

    #[test]
    fn half_offset_unit_cubes_have_3d_iou_one_third() {
        // Intersection 0.5, union 1.5.
        let a = unit_cube_at(0.0);
        let b = unit_cube_at(0.5);
        let v = iou(&a, &b, IouMode::Full3d).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn iou_is_symmetric_and_bounded() {
        let mut rng = Rng::new(12);
        for _ in 0..50 {
            let make = |rng: &mut Rng| {
                Box3D::new(
                    [rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5],
                    [
                        0.3 + rng.uniform(),
                        0.3 + rng.uniform(),
                        0.3 + rng.uniform(),
                    ],
                    (rng.uniform() - 0.5) * 6.0,
                )
                .unwrap()
            };
            let a = make(&mut rng);
            let b = make(&mut rng);
            for mode in [IouMode::Ground, IouMode::Full3d] {
                let ab = iou(&a, &b, mode).unwrap();
                let ba = iou(&b, &a, mode).unwrap();
                assert!((0.0..=1.0).contains(&ab));
                assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
            }
        }
    }

    // Monte-Carlo area oracle, independent of the clipping implementation.
    fn mc_bev_iou(a: &Box3D, b: &Box3D, samples: usize, rng: &mut Rng) -> f64 {
        let corners: Vec<[f64; 2]> = a
            .bev_corners()
            .iter()
            .chain(b.bev_corners().iter())
            .copied()
            .collect();
        let lo_x = corners.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
        let hi_x = corners.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max);
        let lo_y = corners.iter().map(|c| c[1]).fold(f64::INFINITY, f64::min);
        let hi_y = corners.iter().map(|c| c[1]).fold(f64::NEG_INFINITY, f64::max);
        let inside_bev = |bx: &Box3D, x: f64, y: f64| {
            let p = [x, y, bx.center()[2]];
            let mut q = *bx;
            q.size[2] = f64::MAX / 4.0; // ignore z for the BEV check
            q.contains(p)
        };
        let (mut n_inter, mut n_union) = (0usize, 0usize);
        for _ in 0..samples {
            let x = lo_x + rng.uniform() * (hi_x - lo_x);
            let y = lo_y + rng.uniform() * (hi_y - lo_y);
            let in_a = inside_bev(a, x, y);
            let in_b = inside_bev(b, x, y);
            if in_a && in_b {
                n_inter += 1;
            }
            if in_a || in_b {
                n_union += 1;
            }
        }
        if n_union == 0 {
            0.0
        } else {
            n_inter as f64 / n_union as f64
        }
    }

    #[test]
    fn clipping_matches_monte_carlo_on_rotated_pairs() {
        let mut rng = Rng::new(13);
        for _ in 0..20 {
            let a = Box3D::new(
                [rng.uniform() * 0.4, rng.uniform() * 0.4, 0.0],
                [0.5 + rng.uniform(), 0.5 + rng.uniform(), 1.0],
                (rng.uniform() - 0.5) * 6.0,
            )
            .unwrap();
            let b = Box3D::new(
                [rng.uniform() * 0.4, rng.uniform() * 0.4, 0.0],
                [0.5 + rng.uniform(), 0.5 + rng.uniform(), 1.0],
                (rng.uniform() - 0.5) * 6.0,
            )
            .unwrap();
            let exact = iou(&a, &b, IouMode::Ground).unwrap();
            let approx = mc_bev_iou(&a, &b, 60_000, &mut rng);
            assert!((exact - approx).abs() < 1e-2, "{exact} vs {approx}");
        }
    }

    #[test]
    fn degenerate_boxes_are_rejected_at_construction() {
        assert!(Box3D::new([0.0; 3], [0.0, 1.0, 1.0], 0.0).is_err());
        assert!(Box3D::new([0.0; 3], [1.0, 1.0, f64::NAN], 0.0).is_err());
    }

    #[test]
    fn headings_wrap_into_range() {
        let b = Box3D::new([0.0; 3], [1.0; 3], 3.0 * PI / 2.0).unwrap();
        assert!((b.heading() + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
    }

    #[test]
    fn toy_average_precision_counts_threshold_hits() {
        let gt = vec![unit_cube_at(0.0), unit_cube_at(0.0)];
        let pred = vec![unit_cube_at(0.0), unit_cube_at(0.5)];
        // Second prediction has 3D IoU 1/3 < 0.5.
        let ap = average_precision(&pred, &gt, 0.5, IouMode::Full3d).unwrap();
        assert!((ap - 0.5).abs() < 1e-12);
        assert!(average_precision(&[], &[], 0.5, IouMode::Ground).is_err());
    }
}
