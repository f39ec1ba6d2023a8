//! Classification metrics and comparative reports: instance accuracy, mean
//! class accuracy, per-class deltas, and best-per-class ranking.
//!
//! All reported values are averages (never maxima over runs); experiment
//! report headers state this.

use crate::error::{Error, Result};

/// Accuracy summary for one set of predictions.
///
/// Invariants: `mean_class_accuracy` is the unweighted mean of
/// `per_class_accuracy`, and `instance_accuracy` is the class-count-weighted
/// mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub instance_accuracy: f64,
    pub mean_class_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub class_counts: Vec<usize>,
    pub n_samples: usize,
    pub n_classes: usize,
}

fn check_lengths(predictions: &[usize], labels: &[usize]) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("no predictions".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Fraction of correctly classified samples.
pub fn instance_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(predictions, labels)?;
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Unweighted mean of per-class recall. Errors if any class in `[0, C)` has
/// no true sample — the metric is undefined there.
pub fn mean_class_accuracy(
    predictions: &[usize],
    labels: &[usize],
    n_classes: usize,
) -> Result<(f64, Vec<f64>)> {
    check_lengths(predictions, labels)?;
    let mut correct = vec![0usize; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (p, l) in predictions.iter().zip(labels) {
        if *l >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {n_classes} classes"
            )));
        }
        counts[*l] += 1;
        if p == l {
            correct[*l] += 1;
        }
    }
    if let Some(absent) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "class {absent} has no true samples; mean class accuracy undefined"
        )));
    }
    let per_class: Vec<f64> = correct
        .iter()
        .zip(&counts)
        .map(|(&c, &n)| c as f64 / n as f64)
        .collect();
    let mean = per_class.iter().sum::<f64>() / n_classes as f64;
    Ok((mean, per_class))
}

/// Builds the full report; the invariant triple holds by construction.
pub fn metrics_report(
    predictions: &[usize],
    labels: &[usize],
    n_classes: usize,
) -> Result<MetricsReport> {
    let instance = instance_accuracy(predictions, labels)?;
    let (mean_class, per_class) = mean_class_accuracy(predictions, labels, n_classes)?;
    let mut class_counts = vec![0usize; n_classes];
    for l in labels {
        class_counts[*l] += 1;
    }
    Ok(MetricsReport {
        instance_accuracy: instance,
        mean_class_accuracy: mean_class,
        per_class_accuracy: per_class,
        class_counts,
        n_samples: predictions.len(),
        n_classes,
    })
}

/// Per-class signed gain: ensemble minus single.
pub fn per_class_delta(single: &MetricsReport, ensemble: &MetricsReport) -> Result<Vec<f64>> {
    if single.n_classes != ensemble.n_classes {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} classes",
            single.n_classes, ensemble.n_classes
        )));
    }
    Ok(ensemble
        .per_class_accuracy
        .iter()
        .zip(&single.per_class_accuracy)
        .map(|(e, s)| e - s)
        .collect())
}

/// For each class, the reports attaining the maximum per-class accuracy share
/// one point equally (1/N each on an N-way tie). Scores sum to the class
/// count.
pub fn best_per_class_rank(reports: &[MetricsReport]) -> Result<Vec<f64>> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to rank".into()));
    }
    let c = reports[0].n_classes;
    if reports.iter().any(|r| r.n_classes != c) {
        return Err(Error::ShapeMismatch(
            "reports disagree on class count".into(),
        ));
    }
    let mut scores = vec![0.0f64; reports.len()];
    for class in 0..c {
        let best = reports
            .iter()
            .map(|r| r.per_class_accuracy[class])
            .fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = reports
            .iter()
            .enumerate()
            .filter(|(_, r)| r.per_class_accuracy[class] == best)
            .map(|(i, _)| i)
            .collect();
        let share = 1.0 / winners.len() as f64;
        for w in winners {
            scores[w] += share;
        }
    }
    Ok(scores)
}
