//! Constrained simplex-lattice search over mixing weights.

use super::{predictions, weighted_mix, ScoreMatrix, WeightVector};
use crate::error::{Error, Result};
use crate::evaluate::metrics_report;

/// Inclusive weight bounds for one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRange {
    pub min: f64,
    pub max: f64,
}

impl WeightRange {
    /// The unconstrained range `[0, 1]`.
    pub fn free() -> Self {
        WeightRange { min: 0.0, max: 1.0 }
    }
}

/// One evaluated lattice point.
#[derive(Debug, Clone)]
pub struct GridCandidate {
    pub weights: WeightVector,
    pub instance_acc: f64,
    pub class_acc: f64,
}

fn enumerate_lattice(
    n_sources: usize,
    steps_total: usize,
    constraints: &[WeightRange],
    step: f64,
) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; n_sources];
    fn recurse(
        idx: usize,
        remaining: usize,
        current: &mut Vec<usize>,
        constraints: &[WeightRange],
        step: f64,
        out: &mut Vec<Vec<f64>>,
    ) {
        if idx == current.len() - 1 {
            current[idx] = remaining;
            let w = remaining as f64 * step;
            if w >= constraints[idx].min - 1e-9 && w <= constraints[idx].max + 1e-9 {
                out.push(current.iter().map(|&m| m as f64 * step).collect());
            }
            return;
        }
        for m in 0..=remaining {
            let w = m as f64 * step;
            if w < constraints[idx].min - 1e-9 || w > constraints[idx].max + 1e-9 {
                continue;
            }
            current[idx] = m;
            recurse(idx + 1, remaining - m, current, constraints, step, out);
        }
    }
    recurse(0, steps_total, &mut current, constraints, step, &mut out);
    out
}

/// Enumerates every weight vector on the simplex lattice with spacing
/// `grid_step` that satisfies the per-source constraints, evaluates each with
/// [`weighted_mix`] on the given validation matrices, and returns candidates
/// ranked by instance accuracy (descending), ties broken by lexicographically
/// smaller weights.
pub fn weight_grid_search(
    sources: &[ScoreMatrix],
    grid_step: f64,
    constraints: &[WeightRange],
) -> Result<Vec<GridCandidate>> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("no sources".into()));
    }
    if constraints.len() != sources.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} constraints vs {} sources",
            constraints.len(),
            sources.len()
        )));
    }
    if grid_step <= 0.0 || grid_step > 1.0 {
        return Err(Error::InvalidArgument(format!("grid step {grid_step}")));
    }
    let steps_total = (1.0 / grid_step).round();
    if (steps_total * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step} does not divide 1"
        )));
    }
    if constraints.iter().any(|c| c.min > c.max || c.min < 0.0 || c.max > 1.0) {
        return Err(Error::InvalidArgument("unsatisfiable weight range".into()));
    }

    let lattice = enumerate_lattice(sources.len(), steps_total as usize, constraints, grid_step);
    if lattice.is_empty() {
        return Err(Error::InvalidArgument(
            "no lattice point satisfies the constraints".into(),
        ));
    }

    let refs: Vec<&ScoreMatrix> = sources.iter().collect();
    let mut candidates = Vec::with_capacity(lattice.len());
    for weights in lattice {
        // Lattice sums can miss 1 by accumulated rounding; rebuild exactly.
        let sum: f64 = weights.iter().sum();
        let exact: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        let wv = WeightVector::new(exact)?;
        let mixed = weighted_mix(&refs, &wv)?;
        let preds = predictions(&mixed);
        let report = metrics_report(&preds, mixed.labels(), mixed.n_classes())?;
        candidates.push(GridCandidate {
            weights: wv,
            instance_acc: report.instance_accuracy,
            class_acc: report.mean_class_accuracy,
        });
    }
    candidates.sort_by(|a, b| {
        b.instance_acc
            .partial_cmp(&a.instance_acc)
            .unwrap()
            .then_with(|| {
                a.weights
                    .as_slice()
                    .partial_cmp(b.weights.as_slice())
                    .unwrap()
            })
    });
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{aggregate, EnsembleMethod};
    use crate::numerics::{Mat, Rng};

    fn random_sources(n: usize, samples: usize, classes: usize, seed: u64) -> Vec<ScoreMatrix> {
        let mut rng = Rng::new(seed);
        let labels: Vec<usize> = (0..samples)
            .map(|i| if i < classes { i } else { rng.index(classes) })
            .collect();
        (0..n)
            .map(|i| {
                let data: Vec<f64> = (0..samples * classes)
                    .map(|_| rng.uniform() * 2.0 - 1.0)
                    .collect();
                ScoreMatrix::new(
                    Mat::new(samples, classes, data).unwrap(),
                    labels.clone(),
                    (0..samples as u64).collect(),
                    format!("s{i}"),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn two_free_sources_at_step_point_one_give_eleven_points() {
        let sources = random_sources(2, 10, 3, 1);
        let free = vec![WeightRange::free(); 2];
        let results = weight_grid_search(&sources, 0.1, &free).unwrap();
        assert_eq!(results.len(), 11);
    }

    #[test]
    fn interior_constraint_gives_the_nine_point_pair_grid() {
        let sources = random_sources(2, 10, 3, 2);
        let constraints = vec![
            WeightRange { min: 0.1, max: 0.9 },
            WeightRange::free(),
        ];
        let results = weight_grid_search(&sources, 0.1, &constraints).unwrap();
        assert_eq!(results.len(), 9);
    }

    #[test]
    fn pinned_weight_reduces_to_the_single_source() {
        let sources = random_sources(2, 10, 3, 3);
        let constraints = vec![
            WeightRange { min: 1.0, max: 1.0 },
            WeightRange::free(),
        ];
        let results = weight_grid_search(&sources, 0.1, &constraints).unwrap();
        assert_eq!(results.len(), 1);
        let single = aggregate(&[&sources[0]], EnsembleMethod::RawMean).unwrap();
        let preds = crate::ensemble::predictions(&single);
        let report =
            crate::evaluate::metrics_report(&preds, single.labels(), single.n_classes()).unwrap();
        assert!((results[0].instance_acc - report.instance_accuracy).abs() < 1e-12);
    }

    #[test]
    fn infeasible_lattice_is_an_error() {
        let sources = random_sources(2, 10, 3, 4);
        let constraints = vec![
            WeightRange { min: 0.8, max: 0.9 },
            WeightRange { min: 0.8, max: 0.9 },
        ];
        assert!(weight_grid_search(&sources, 0.1, &constraints).is_err());
    }

    #[test]
    fn non_dividing_step_is_an_error() {
        let sources = random_sources(2, 10, 3, 5);
        let free = vec![WeightRange::free(); 2];
        assert!(weight_grid_search(&sources, 0.3, &free).is_err());
    }

    #[test]
    fn ordering_is_accuracy_descending() {
        let sources = random_sources(3, 20, 4, 6);
        let free = vec![WeightRange::free(); 3];
        let results = weight_grid_search(&sources, 0.25, &free).unwrap();
        for w in results.windows(2) {
            assert!(w[0].instance_acc >= w[1].instance_acc);
        }
    }
}
