//! Synthetic frustum-style scenes: a posed box-bounded object plus uniform
//! clutter in a surrounding slab, with per-point ground-truth mask and the
//! amodal oriented box.

use std::fs;
use std::path::Path;

use super::boxes::Box3D;
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Rng};
use crate::pointcloud::PointCloud;

use std::f64::consts::PI;

/// Scene object classes: name and base extents.
pub const SCENE_CLASSES: [(&str, [f64; 3]); 3] = [
    ("wide", [2.0, 1.0, 0.8]),
    ("tall", [0.5, 0.5, 1.6]),
    ("long", [1.4, 0.6, 1.1]),
];

/// Standard deviation of the per-coordinate noise on object points. Kept
/// small relative to the extents so the tight noiseless box still contains
/// nearly all noisy points.
pub const OBJECT_NOISE_SIGMA: f64 = 0.005;

/// A synthetic frustum scene.
#[derive(Debug, Clone, PartialEq)]
pub struct FrustumScene {
    /// Object points plus clutter, shuffled.
    pub cloud: PointCloud,
    /// Object class index into [`SCENE_CLASSES`].
    pub class_idx: usize,
    /// Per-point ground truth: `true` for object points.
    pub gt_mask: Vec<bool>,
    /// Tight oriented box of the noiseless object points.
    pub gt_box: Box3D,
}

fn rotate_z(p: [f64; 3], sin: f64, cos: f64) -> [f64; 3] {
    [cos * p[0] - sin * p[1], sin * p[0] + cos * p[1], p[2]]
}

/// Generates one scene.
///
/// Object points are sampled uniformly inside a slightly shrunk posed box
/// and perturbed by Gaussian noise; clutter is uniform in a slab surrounding
/// the object. The ground-truth box is the tight oriented box of the
/// noiseless object sample, so it contains all object points up to the noise
/// on the extremes.
pub fn generate_scene(
    class_idx: usize,
    n_object_points: usize,
    n_clutter_points: usize,
    rng: &mut Rng,
) -> Result<FrustumScene> {
    if class_idx >= SCENE_CLASSES.len() {
        return Err(Error::InvalidArgument(format!(
            "class index {class_idx} out of range"
        )));
    }
    if n_object_points == 0 {
        return Err(Error::InvalidArgument("scene needs object points".into()));
    }
    let base = SCENE_CLASSES[class_idx].1;
    let extents = [
        base[0] * (0.85 + 0.3 * rng.uniform()),
        base[1] * (0.85 + 0.3 * rng.uniform()),
        base[2] * (0.85 + 0.3 * rng.uniform()),
    ];
    let heading = rng.uniform() * 2.0 * PI - PI;
    let center = [
        (rng.uniform() * 2.0 - 1.0) * 1.5,
        (rng.uniform() * 2.0 - 1.0) * 1.5,
        (rng.uniform() * 2.0 - 1.0) * 0.3,
    ];
    let (sin, cos) = heading.sin_cos();

    // Local object sample inside 0.9-scaled half-extents.
    let local: Vec<[f64; 3]> = (0..n_object_points)
        .map(|_| {
            [
                (rng.uniform() * 2.0 - 1.0) * 0.45 * extents[0],
                (rng.uniform() * 2.0 - 1.0) * 0.45 * extents[1],
                (rng.uniform() * 2.0 - 1.0) * 0.45 * extents[2],
            ]
        })
        .collect();

    // Tight local box of the noiseless sample.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &local {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let local_center = [
        (lo[0] + hi[0]) / 2.0,
        (lo[1] + hi[1]) / 2.0,
        (lo[2] + hi[2]) / 2.0,
    ];
    let tight_size = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let rotated_center = rotate_z(local_center, sin, cos);
    let gt_box = Box3D::new(
        [
            rotated_center[0] + center[0],
            rotated_center[1] + center[1],
            rotated_center[2] + center[2],
        ],
        tight_size,
        heading,
    )?;

    // Pose then perturb.
    let mut object_world: Vec<[f64; 3]> = local
        .iter()
        .map(|p| {
            let r = rotate_z(*p, sin, cos);
            [r[0] + center[0], r[1] + center[1], r[2] + center[2]]
        })
        .collect();
    for p in &mut object_world {
        for c in p.iter_mut() {
            *c += rng.normal() * OBJECT_NOISE_SIGMA;
        }
    }

    // Clutter slab around the object's axis-aligned footprint.
    let mut alo = [f64::INFINITY; 3];
    let mut ahi = [f64::NEG_INFINITY; 3];
    for p in &object_world {
        for k in 0..3 {
            alo[k] = alo[k].min(p[k]);
            ahi[k] = ahi[k].max(p[k]);
        }
    }
    let spans = [ahi[0] - alo[0], ahi[1] - alo[1], ahi[2] - alo[2]];
    let clutter: Vec<[f64; 3]> = (0..n_clutter_points)
        .map(|_| {
            [
                alo[0] - spans[0] + rng.uniform() * 3.0 * spans[0],
                alo[1] - spans[1] + rng.uniform() * 3.0 * spans[1],
                alo[2] - 0.3 * spans[2] + rng.uniform() * 1.6 * spans[2],
            ]
        })
        .collect();

    let mut points = object_world;
    let mut mask = vec![true; n_object_points];
    points.extend(clutter);
    mask.extend(vec![false; n_clutter_points]);

    let mut order: Vec<usize> = (0..points.len()).collect();
    rng.shuffle(&mut order);
    let shuffled_points: Vec<[f64; 3]> = order.iter().map(|&i| points[i]).collect();
    let shuffled_mask: Vec<bool> = order.iter().map(|&i| mask[i]).collect();

    Ok(FrustumScene {
        cloud: PointCloud::new(shuffled_points)?,
        class_idx,
        gt_mask: shuffled_mask,
        gt_box,
    })
}

/// Generates `n_scenes` scenes with classes assigned round-robin; scene `i`
/// draws from its own derived seed stream.
pub fn generate_scene_set(
    n_scenes: usize,
    n_object_points: usize,
    n_clutter_points: usize,
    seed: u64,
) -> Result<Vec<FrustumScene>> {
    (0..n_scenes)
        .map(|i| {
            let mut rng = Rng::new(derive_seed(seed, i as u64));
            generate_scene(
                i % SCENE_CLASSES.len(),
                n_object_points,
                n_clutter_points,
                &mut rng,
            )
        })
        .collect()
}

/// Writes scenes in the `PSCENE 1` format: the dataset layout extended with a
/// mask line and a box line (`cx cy cz sx sy sz heading`) per scene.
pub fn write_scenes(scenes: &[FrustumScene], path: &Path) -> Result<()> {
    if scenes.is_empty() {
        return Err(Error::InvalidArgument("no scenes to write".into()));
    }
    let n_points = scenes[0].cloud.len();
    let mut out = String::new();
    out.push_str(&format!(
        "PSCENE 1 {} {} {}\n",
        scenes.len(),
        SCENE_CLASSES.len(),
        n_points
    ));
    let names: Vec<&str> = SCENE_CLASSES.iter().map(|(n, _)| *n).collect();
    out.push_str(&names.join(" "));
    out.push('\n');
    for (i, scene) in scenes.iter().enumerate() {
        if scene.cloud.len() != n_points {
            return Err(Error::InvalidArgument(format!(
                "scene {i} has {} points, header says {n_points}",
                scene.cloud.len()
            )));
        }
        out.push_str(&format!("{}\n", scene.class_idx));
        let mask: Vec<&str> = scene
            .gt_mask
            .iter()
            .map(|&m| if m { "1" } else { "0" })
            .collect();
        out.push_str(&mask.join(" "));
        out.push('\n');
        let b = &scene.gt_box;
        out.push_str(&format!(
            "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}\n",
            b.center()[0],
            b.center()[1],
            b.center()[2],
            b.size()[0],
            b.size()[1],
            b.size()[2],
            b.heading()
        ));
        for p in scene.cloud.points() {
            out.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", p[0], p[1], p[2]));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a `PSCENE 1` file; errors name the offending line.
pub fn read_scenes(path: &Path) -> Result<Vec<FrustumScene>> {
    let text = fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&path_str, 1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "PSCENE" || fields[1] != "1" {
        return Err(Error::parse(&path_str, 1, "malformed header"));
    }
    let n_scenes: usize = fields[2]
        .parse()
        .map_err(|_| Error::parse(&path_str, 1, "bad scene count"))?;
    let n_classes: usize = fields[3]
        .parse()
        .map_err(|_| Error::parse(&path_str, 1, "bad class count"))?;
    let n_points: usize = fields[4]
        .parse()
        .map_err(|_| Error::parse(&path_str, 1, "bad point count"))?;

    let (_, _names) = lines
        .next()
        .ok_or_else(|| Error::parse(&path_str, 2, "missing class names"))?;

    let mut scenes = Vec::with_capacity(n_scenes);
    for _ in 0..n_scenes {
        let eof = || Error::parse(&path_str, text.lines().count() + 1, "unexpected end of file");
        let (lidx, label_line) = lines.next().ok_or_else(eof)?;
        let class_idx: usize = label_line
            .trim()
            .parse()
            .map_err(|_| Error::parse(&path_str, lidx + 1, "bad class index"))?;
        if class_idx >= n_classes {
            return Err(Error::parse(&path_str, lidx + 1, "class index out of range"));
        }
        let (midx, mask_line) = lines.next().ok_or_else(eof)?;
        let gt_mask: Vec<bool> = mask_line
            .split_whitespace()
            .map(|t| match t {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(Error::parse(
                    &path_str,
                    midx + 1,
                    format!("bad mask bit {other:?}"),
                )),
            })
            .collect::<Result<_>>()?;
        if gt_mask.len() != n_points {
            return Err(Error::parse(
                &path_str,
                midx + 1,
                format!("mask has {} bits, expected {n_points}", gt_mask.len()),
            ));
        }
        let (bidx, box_line) = lines.next().ok_or_else(eof)?;
        let vals: Vec<f64> = box_line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(&path_str, bidx + 1, format!("bad box value {t:?}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 7 {
            return Err(Error::parse(
                &path_str,
                bidx + 1,
                format!("box line has {} values, expected 7", vals.len()),
            ));
        }
        let gt_box = Box3D::new([vals[0], vals[1], vals[2]], [vals[3], vals[4], vals[5]], vals[6])?;
        let mut points = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            let (pidx, coord_line) = lines.next().ok_or_else(eof)?;
            let coords: Vec<f64> = coord_line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| {
                        Error::parse(&path_str, pidx + 1, format!("bad coordinate {t:?}"))
                    })
                })
                .collect::<Result<_>>()?;
            if coords.len() != 3 {
                return Err(Error::parse(&path_str, pidx + 1, "expected 3 coordinates"));
            }
            points.push([coords[0], coords[1], coords[2]]);
        }
        scenes.push(FrustumScene {
            cloud: PointCloud::new(points)?,
            class_idx,
            gt_mask,
            gt_box,
        });
    }
    Ok(scenes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_clutter_makes_the_mask_all_ones() {
        let mut rng = Rng::new(3);
        let scene = generate_scene(0, 32, 0, &mut rng).unwrap();
        assert!(scene.gt_mask.iter().all(|&m| m));
        assert_eq!(scene.cloud.len(), 32);
    }

    #[test]
    fn scenes_are_reproducible_per_seed() {
        let a = generate_scene(1, 24, 16, &mut Rng::new(9)).unwrap();
        let b = generate_scene(1, 24, 16, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gt_box_contains_nearly_all_noisy_object_points() {
        let mut total = 0usize;
        let mut contained = 0usize;
        for seed in 0..20 {
            let scene = generate_scene(seed % 3, 100, 0, &mut Rng::new(seed as u64)).unwrap();
            for (p, &is_obj) in scene.cloud.points().iter().zip(&scene.gt_mask) {
                if is_obj {
                    total += 1;
                    if scene.gt_box.contains(*p) {
                        contained += 1;
                    }
                }
            }
        }
        let fraction = contained as f64 / total as f64;
        assert!(fraction >= 0.95, "containment {fraction}");
    }

    #[test]
    fn scene_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenes.pscene");
        let scenes = generate_scene_set(4, 24, 12, 77).unwrap();
        write_scenes(&scenes, &path).unwrap();
        let back = read_scenes(&path).unwrap();
        assert_eq!(scenes, back);
    }

    #[test]
    fn malformed_scene_files_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pscene");
        fs::write(&path, "PSCENE 1 1 3 2\nwide tall long\n0\n1 2\n").unwrap();
        let err = read_scenes(&path).unwrap_err();
        assert!(err.to_string().contains(":4:"), "{err}");
    }
}
