//! Synthetic parametric shape families.
//!
//! Eight surface families stand in for a CAD-model benchmark at desk scale.
//! Each shape is constructed centered at the origin, sampled uniformly over
//! its surface, perturbed by isotropic Gaussian noise, then scaled so the
//! farthest point has norm 1. Scaling (rather than full re-normalization)
//! keeps surface geometry intact: a noiseless sphere stays a unit sphere.

use super::PointCloud;
use crate::error::{Error, Result};
use crate::numerics::Rng;

use std::f64::consts::{PI, TAU};

/// The eight shape classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Sphere,
    Cube,
    Cylinder,
    Cone,
    Torus,
    Pyramid,
    PlanePair,
    Helix,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 8] = [
        ShapeKind::Sphere,
        ShapeKind::Cube,
        ShapeKind::Cylinder,
        ShapeKind::Cone,
        ShapeKind::Torus,
        ShapeKind::Pyramid,
        ShapeKind::PlanePair,
        ShapeKind::Helix,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Cube => "cube",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Cone => "cone",
            ShapeKind::Torus => "torus",
            ShapeKind::Pyramid => "pyramid",
            ShapeKind::PlanePair => "plane_pair",
            ShapeKind::Helix => "helix",
        }
    }

    pub fn from_name(name: &str) -> Result<ShapeKind> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown shape kind {name:?}")))
    }
}

/// Half-extent of the cube family's surface before scaling.
pub(crate) const CUBE_HALF_EXTENT: f64 = 0.75;

/// One uniform surface sample for `kind`, centered at the origin.
fn sample_surface_point(kind: ShapeKind, rng: &mut Rng) -> [f64; 3] {
    match kind {
        ShapeKind::Sphere => loop {
            let v = [rng.normal(), rng.normal(), rng.normal()];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-12 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        },
        ShapeKind::Cube => {
            let h = CUBE_HALF_EXTENT;
            let face = rng.index(6);
            let (axis, sign) = (face / 2, if face % 2 == 0 { 1.0 } else { -1.0 });
            let mut p = [
                (rng.uniform() * 2.0 - 1.0) * h,
                (rng.uniform() * 2.0 - 1.0) * h,
                (rng.uniform() * 2.0 - 1.0) * h,
            ];
            p[axis] = sign * h;
            p
        }
        ShapeKind::Cylinder => {
            let (r, half_h) = (0.5, 0.9);
            let lateral = TAU * r * (2.0 * half_h);
            let caps = 2.0 * PI * r * r;
            if rng.uniform() < lateral / (lateral + caps) {
                let theta = rng.uniform() * TAU;
                let z = (rng.uniform() * 2.0 - 1.0) * half_h;
                [r * theta.cos(), r * theta.sin(), z]
            } else {
                let z = if rng.uniform() < 0.5 { half_h } else { -half_h };
                let rr = r * rng.uniform().sqrt();
                let theta = rng.uniform() * TAU;
                [rr * theta.cos(), rr * theta.sin(), z]
            }
        }
        ShapeKind::Cone => {
            let (r, apex_z, base_z) = (0.7f64, 0.9, -0.6);
            let h = apex_z - base_z;
            let slant = (r * r + h * h).sqrt();
            let lateral = PI * r * slant;
            let base = PI * r * r;
            if rng.uniform() < lateral / (lateral + base) {
                // Area element grows linearly from the apex: t = sqrt(u).
                let t = rng.uniform().sqrt();
                let theta = rng.uniform() * TAU;
                let rr = t * r;
                [rr * theta.cos(), rr * theta.sin(), apex_z - t * h]
            } else {
                let rr = r * rng.uniform().sqrt();
                let theta = rng.uniform() * TAU;
                [rr * theta.cos(), rr * theta.sin(), base_z]
            }
        }
        ShapeKind::Torus => {
            let (major, minor) = (0.65, 0.25);
            let phi = rng.uniform() * TAU;
            // Rejection on the minor angle: density is (R + r cos psi)/(R + r).
            let psi = loop {
                let candidate = rng.uniform() * TAU;
                let accept = (major + minor * candidate.cos()) / (major + minor);
                if rng.uniform() < accept {
                    break candidate;
                }
            };
            let ring = major + minor * psi.cos();
            [ring * phi.cos(), ring * phi.sin(), minor * psi.sin()]
        }
        ShapeKind::Pyramid => {
            let (half, base_z, apex_z) = (0.7, -0.5, 0.9);
            let apex = [0.0, 0.0, apex_z];
            let corners = [
                [half, half, base_z],
                [-half, half, base_z],
                [-half, -half, base_z],
                [half, -half, base_z],
            ];
            let base_area = (2.0 * half) * (2.0 * half);
            let tri_area = {
                // All four side faces are congruent.
                let e0 = sub(corners[1], corners[0]);
                let e1 = sub(apex, corners[0]);
                0.5 * cross_norm(e0, e1)
            };
            let total = base_area + 4.0 * tri_area;
            let pick = rng.uniform() * total;
            if pick < base_area {
                [
                    (rng.uniform() * 2.0 - 1.0) * half,
                    (rng.uniform() * 2.0 - 1.0) * half,
                    base_z,
                ]
            } else {
                let face = rng.index(4);
                let a = corners[face];
                let b = corners[(face + 1) % 4];
                sample_triangle(a, b, apex, rng)
            }
        }
        ShapeKind::PlanePair => {
            let (half, offset) = (0.8, 0.45);
            let z = if rng.uniform() < 0.5 { offset } else { -offset };
            [
                (rng.uniform() * 2.0 - 1.0) * half,
                (rng.uniform() * 2.0 - 1.0) * half,
                z,
            ]
        }
        ShapeKind::Helix => {
            let (r, half_height, turns) = (0.6, 0.8, 2.0);
            // Arc length is linear in the parameter, so uniform t is uniform
            // along the curve.
            let t = rng.uniform() * turns * TAU;
            let z = -half_height + 2.0 * half_height * t / (turns * TAU);
            [r * t.cos(), r * t.sin(), z]
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross_norm(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

/// Uniform sample on a triangle via the square-root barycentric trick.
fn sample_triangle(a: [f64; 3], b: [f64; 3], c: [f64; 3], rng: &mut Rng) -> [f64; 3] {
    let r1 = rng.uniform().sqrt();
    let r2 = rng.uniform();
    let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
    [
        wa * a[0] + wb * b[0] + wc * c[0],
        wa * a[1] + wb * b[1] + wc * c[1],
        wa * a[2] + wb * b[2] + wc * c[2],
    ]
}

/// Samples `n_points` uniformly over the surface of `kind`, perturbs each by
/// isotropic Gaussian noise of standard deviation `noise_sigma`, then scales
/// the cloud so its farthest point from the origin has norm 1.
pub fn generate_shape(
    kind: ShapeKind,
    n_points: usize,
    noise_sigma: f64,
    rng: &mut Rng,
) -> Result<PointCloud> {
    if n_points < 8 {
        return Err(Error::InvalidArgument(format!(
            "n_points {n_points} < 8"
        )));
    }
    if noise_sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise_sigma {noise_sigma} < 0"
        )));
    }
    let mut points = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let mut p = sample_surface_point(kind, rng);
        // Noise draws are consumed regardless of sigma so the stream position
        // is independent of the noise setting.
        for c in &mut p {
            *c += rng.normal() * noise_sigma;
        }
        points.push(p);
    }
    let max_norm = points
        .iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
        .fold(0.0f64, f64::max);
    if max_norm > 1e-15 {
        for p in &mut points {
            for c in p.iter_mut() {
                *c /= max_norm;
            }
        }
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_sphere_points_sit_on_the_unit_sphere() {
        let mut rng = Rng::new(5);
        let pc = generate_shape(ShapeKind::Sphere, 128, 0.0, &mut rng).unwrap();
        for p in pc.points() {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-9, "norm {n}");
        }
    }

    #[test]
    fn cube_surface_points_touch_a_face_before_scaling() {
        let mut rng = Rng::new(6);
        for _ in 0..200 {
            let p = sample_surface_point(ShapeKind::Cube, &mut rng);
            let on_face = p
                .iter()
                .any(|c| (c.abs() - CUBE_HALF_EXTENT).abs() < 1e-9);
            assert!(on_face, "{p:?} not on cube surface");
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        for kind in ShapeKind::ALL {
            let a = generate_shape(kind, 64, 0.02, &mut Rng::new(17)).unwrap();
            let b = generate_shape(kind, 64, 0.02, &mut Rng::new(17)).unwrap();
            assert_eq!(a, b, "{kind:?} not reproducible");
        }
    }

    #[test]
    fn every_family_is_bounded_by_the_unit_sphere() {
        let mut rng = Rng::new(8);
        for kind in ShapeKind::ALL {
            let pc = generate_shape(kind, 64, 0.05, &mut rng).unwrap();
            let max = pc
                .points()
                .iter()
                .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
                .fold(0.0f64, f64::max);
            assert!((max - 1.0).abs() < 1e-9, "{kind:?} max norm {max}");
        }
    }

    #[test]
    fn small_counts_and_negative_noise_are_rejected() {
        let mut rng = Rng::new(0);
        assert!(generate_shape(ShapeKind::Sphere, 7, 0.0, &mut rng).is_err());
        assert!(generate_shape(ShapeKind::Sphere, 8, -0.1, &mut rng).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ShapeKind::ALL {
            assert_eq!(ShapeKind::from_name(kind.name()).unwrap(), kind);
        }
        assert!(ShapeKind::from_name("dodecahedron").is_err());
    }
}
