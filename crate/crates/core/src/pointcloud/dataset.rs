//! Labeled datasets, train/test bookkeeping, bagging samplers, and the
//! line-oriented dataset file format.
//!
//! Dataset file (UTF-8, one value per whitespace gap):
//!
//! ```text
//! PSET 1 <n_samples> <n_classes> <n_points>
//! <class_name_0> ... <class_name_{C-1}>
//! <label>
//! <x> <y> <z>            (n_points coordinate lines)
//! <label>
//! ...
//! ```
//!
//! Coordinates are written with 17 significant decimal digits, which
//! round-trips every finite double bit-exactly.

use std::fs;
use std::path::Path;

use super::{generate_shape, PointCloud, ShapeKind};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Rng};

/// Point clouds with integer class labels over `C >= 2` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Vec<(PointCloud, usize)>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<(PointCloud, usize)>, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::InvalidArgument(
                "a dataset needs at least 2 classes".into(),
            ));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let c = class_names.len();
        if let Some((_, label)) = samples.iter().find(|(_, l)| *l >= c) {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {c} classes"
            )));
        }
        Ok(LabeledDataset {
            samples,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn cloud(&self, i: usize) -> &PointCloud {
        &self.samples[i].0
    }

    pub fn label(&self, i: usize) -> usize {
        self.samples[i].1
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|(_, l)| *l).collect()
    }

    /// Per-class sample counts, in file order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for (_, l) in &self.samples {
            counts[*l] += 1;
        }
        counts
    }

    /// Splits off the last `test_per_class` samples of each class (in file
    /// order) as the test set; everything else is the training pool.
    pub fn split_last_per_class(&self, test_per_class: usize) -> Result<SplitIndices> {
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); self.n_classes()];
        for (i, (_, label)) in self.samples.iter().enumerate() {
            per_class[*label].push(i);
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for indices in &per_class {
            if indices.len() <= test_per_class {
                return Err(Error::InvalidArgument(format!(
                    "class with {} samples cannot give {test_per_class} test samples",
                    indices.len()
                )));
            }
            let cut = indices.len() - test_per_class;
            train.extend_from_slice(&indices[..cut]);
            test.extend_from_slice(&indices[cut..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok(SplitIndices { train, test })
    }
}

/// Train/test split bookkeeping for a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// How a bagging training set is drawn from a pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BagMode {
    /// Every pool index, in order (the "simple ensemble" protocol).
    Full,
    /// `round(fraction * pool)` distinct indices drawn uniformly. Canonical
    /// fractions are 0.1, 0.2, ..., 0.9, but any value in (0, 1] is accepted.
    WithoutReplacement(f64),
    /// `pool` indices drawn uniformly with repeats allowed.
    WithReplacement,
}

/// A seeded bagging draw specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaggingSpec {
    pub mode: BagMode,
    pub seed: u64,
}

/// Draws training indices from a pool of size `n` according to `spec`.
/// Deterministic given the seed.
pub fn make_split_indices(n: usize, spec: &BaggingSpec) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty pool".into()));
    }
    let mut rng = Rng::new(spec.seed);
    match spec.mode {
        BagMode::Full => Ok((0..n).collect()),
        BagMode::WithoutReplacement(fraction) => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidArgument(format!(
                    "fraction {fraction} outside (0, 1]"
                )));
            }
            let size = (fraction * n as f64).round() as usize;
            if size == 0 {
                return Err(Error::InvalidArgument(format!(
                    "fraction {fraction} of {n} samples rounds to zero"
                )));
            }
            // Partial Fisher-Yates: the first `size` entries are a uniform
            // distinct draw.
            let mut pool: Vec<usize> = (0..n).collect();
            for i in 0..size {
                let j = i + rng.index(n - i);
                pool.swap(i, j);
            }
            pool.truncate(size);
            Ok(pool)
        }
        BagMode::WithReplacement => Ok((0..n).map(|_| rng.index(n)).collect()),
    }
}

/// [`make_split_indices`] over a whole dataset.
pub fn make_split(dataset: &LabeledDataset, spec: &BaggingSpec) -> Result<Vec<usize>> {
    make_split_indices(dataset.len(), spec)
}

/// Parameters for synthetic dataset generation.
#[derive(Debug, Clone)]
pub struct GenSpec {
    /// Shape families to use as classes, in class-index order.
    pub kinds: Vec<ShapeKind>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl GenSpec {
    /// The canonical desk-scale setup: all 8 families, 100 train + 40 test
    /// clouds per class, 256 points each.
    pub fn default_with_seed(seed: u64) -> GenSpec {
        GenSpec {
            kinds: ShapeKind::ALL.to_vec(),
            train_per_class: 100,
            test_per_class: 40,
            n_points: 256,
            noise_sigma: 0.02,
            seed,
        }
    }
}

/// Generates a dataset class by class, training clouds first and test clouds
/// last within each class, so [`LabeledDataset::split_last_per_class`] with
/// `test_per_class` recovers the generation split.
pub fn generate_dataset(spec: &GenSpec) -> Result<LabeledDataset> {
    if spec.kinds.len() < 2 {
        return Err(Error::InvalidArgument(
            "dataset generation needs at least 2 classes".into(),
        ));
    }
    if spec.train_per_class == 0 {
        return Err(Error::InvalidArgument("train_per_class = 0".into()));
    }
    let mut samples = Vec::new();
    for (label, kind) in spec.kinds.iter().enumerate() {
        let mut rng = Rng::new(derive_seed(spec.seed, label as u64));
        for _ in 0..spec.train_per_class + spec.test_per_class {
            let cloud = generate_shape(*kind, spec.n_points, spec.noise_sigma, &mut rng)?;
            samples.push((cloud, label));
        }
    }
    let class_names = spec.kinds.iter().map(|k| k.name().to_string()).collect();
    LabeledDataset::new(samples, class_names)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a dataset in the `PSET 1` format.
pub fn write_dataset(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let n_points = dataset.cloud(0).len();
    out.push_str(&format!(
        "PSET 1 {} {} {}\n",
        dataset.len(),
        dataset.n_classes(),
        n_points
    ));
    out.push_str(&dataset.class_names().join(" "));
    out.push('\n');
    for i in 0..dataset.len() {
        let cloud = dataset.cloud(i);
        if cloud.len() != n_points {
            return Err(Error::InvalidArgument(format!(
                "sample {i} has {} points, header says {n_points}",
                cloud.len()
            )));
        }
        out.push_str(&format!("{}\n", dataset.label(i)));
        for p in cloud.points() {
            out.push_str(&format!(
                "{} {} {}\n",
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(p[2])
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a `PSET 1` dataset file, validating as it goes; errors name the
/// offending line.
pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&path_str, 1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "PSET" || fields[1] != "1" {
        return Err(Error::parse(&path_str, 1, "malformed header, expected `PSET 1 <n_samples> <n_classes> <n_points>`"));
    }
    let parse_count = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::parse(&path_str, 1, format!("bad {what} {s:?}")))
    };
    let n_samples = parse_count(fields[2], "sample count")?;
    let n_classes = parse_count(fields[3], "class count")?;
    let n_points = parse_count(fields[4], "point count")?;

    let (_, names_line) = lines
        .next()
        .ok_or_else(|| Error::parse(&path_str, 2, "missing class-name line"))?;
    let class_names: Vec<String> = names_line
        .split_whitespace()
        .map(str::to_string)
        .collect();
    if class_names.len() != n_classes {
        return Err(Error::parse(
            &path_str,
            2,
            format!(
                "expected {n_classes} class names, found {}",
                class_names.len()
            ),
        ));
    }

    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let (idx, label_line) = lines
            .next()
            .ok_or_else(|| Error::parse(&path_str, text.lines().count() + 1, "unexpected end of file"))?;
        let label: usize = label_line.trim().parse().map_err(|_| {
            Error::parse(&path_str, idx + 1, format!("bad label {label_line:?}"))
        })?;
        if label >= n_classes {
            return Err(Error::parse(
                &path_str,
                idx + 1,
                format!("label {label} out of range for {n_classes} classes"),
            ));
        }
        let mut points = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            let (pidx, coord_line) = lines.next().ok_or_else(|| {
                Error::parse(&path_str, text.lines().count() + 1, "unexpected end of file")
            })?;
            let coords: Vec<&str> = coord_line.split_whitespace().collect();
            if coords.len() != 3 {
                return Err(Error::parse(
                    &path_str,
                    pidx + 1,
                    format!("expected 3 coordinates, found {}", coords.len()),
                ));
            }
            let mut p = [0.0f64; 3];
            for (k, c) in coords.iter().enumerate() {
                let v: f64 = c.parse().map_err(|_| {
                    Error::parse(&path_str, pidx + 1, format!("bad coordinate {c:?}"))
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(
                        &path_str,
                        pidx + 1,
                        format!("non-finite coordinate {c}"),
                    ));
                }
                p[k] = v;
            }
            points.push(p);
        }
        samples.push((PointCloud::new(points)?, label));
    }
    LabeledDataset::new(samples, class_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> LabeledDataset {
        let spec = GenSpec {
            kinds: vec![ShapeKind::Sphere, ShapeKind::Cube],
            train_per_class: 3,
            test_per_class: 1,
            n_points: 16,
            noise_sigma: 0.01,
            seed: 5,
        };
        generate_dataset(&spec).unwrap()
    }

    #[test]
    fn dataset_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.pset");
        let ds = tiny_dataset();
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn out_of_range_label_is_rejected_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pset");
        fs::write(
            &path,
            "PSET 1 1 3 1\na b c\n5\n0.0 0.0 0.0\n",
        )
        .unwrap();
        let err = read_dataset(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":3:"), "{msg}");
        assert!(msg.contains("label 5"), "{msg}");
    }

    #[test]
    fn empty_file_reports_missing_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.pset");
        fs::write(&path, "").unwrap();
        let err = read_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("missing header"), "{err}");
    }

    #[test]
    fn non_finite_coordinate_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.pset");
        fs::write(&path, "PSET 1 1 2 1\na b\n0\nNaN 0.0 0.0\n").unwrap();
        let err = read_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn split_without_replacement_has_exact_size_and_no_duplicates() {
        let spec = BaggingSpec {
            mode: BagMode::WithoutReplacement(0.3),
            seed: 1,
        };
        let split = make_split_indices(100, &spec).unwrap();
        assert_eq!(split.len(), 30);
        let mut sorted = split.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 30);
    }

    #[test]
    fn split_full_is_the_identity() {
        let spec = BaggingSpec {
            mode: BagMode::Full,
            seed: 9,
        };
        assert_eq!(
            make_split_indices(5, &spec).unwrap(),
            vec![0, 1, 2, 3, 4]
        );
    }

    #[test]
    fn split_with_replacement_hits_the_expected_distinct_fraction() {
        // Mean distinct fraction over seeds approaches 1 - 1/e for large pools.
        let n = 100;
        let mut total = 0.0;
        let trials = 200;
        for seed in 0..trials {
            let spec = BaggingSpec {
                mode: BagMode::WithReplacement,
                seed,
            };
            let split = make_split_indices(n, &spec).unwrap();
            assert_eq!(split.len(), n);
            let mut sorted = split;
            sorted.sort_unstable();
            sorted.dedup();
            total += sorted.len() as f64 / n as f64;
        }
        let mean = total / trials as f64;
        let expected = 1.0 - (-1.0f64).exp();
        assert!((mean - expected).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn split_rounding_to_zero_is_an_error() {
        let spec = BaggingSpec {
            mode: BagMode::WithoutReplacement(0.01),
            seed: 0,
        };
        assert!(make_split_indices(10, &spec).is_err());
    }

    #[test]
    fn splits_are_deterministic_per_seed() {
        for mode in [
            BagMode::WithoutReplacement(0.5),
            BagMode::WithReplacement,
        ] {
            let spec = BaggingSpec { mode, seed: 33 };
            assert_eq!(
                make_split_indices(50, &spec).unwrap(),
                make_split_indices(50, &spec).unwrap()
            );
        }
    }

    #[test]
    fn per_class_split_respects_generation_order() {
        let ds = tiny_dataset();
        let split = ds.split_last_per_class(1).unwrap();
        assert_eq!(split.train.len(), 6);
        assert_eq!(split.test.len(), 2);
        // Last sample of each class block is test.
        assert_eq!(split.test, vec![3, 7]);
    }

    #[test]
    fn generation_is_reproducible() {
        assert_eq!(tiny_dataset(), tiny_dataset());
    }
}
