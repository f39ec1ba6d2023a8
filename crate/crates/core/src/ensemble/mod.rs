//! Vote aggregation and ensemble statistics.
//!
//! The currency of every operation here is the [`ScoreMatrix`]: per-sample
//! raw class activations from one model instance (or from a previous
//! aggregation). Matrices being combined must be row-aligned — same sample
//! ids, same labels, same class count — which is checked on every call.

mod bagging;
mod grid;
mod scores_io;
mod subsets;

pub use bagging::{run_bagging_experiment, BaggingReport, BaggingRow};
pub use grid::{weight_grid_search, GridCandidate, WeightRange};
pub use scores_io::{read_scores, write_scores};
pub use subsets::{binomial, evaluate_k_subsets, Stat, SubsetEvaluation, SubsetPolicy};

use crate::error::{Error, Result};
use crate::numerics::{argmax, softmax, Mat};

/// Per-sample raw class activations for one source, with true labels and
/// stable sample ids for alignment checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    scores: Mat,
    labels: Vec<usize>,
    sample_ids: Vec<u64>,
    source_tag: String,
}

impl ScoreMatrix {
    pub fn new(
        scores: Mat,
        labels: Vec<usize>,
        sample_ids: Vec<u64>,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        if labels.len() != scores.rows() || sample_ids.len() != scores.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows vs {} labels vs {} ids",
                scores.rows(),
                labels.len(),
                sample_ids.len()
            )));
        }
        let c = scores.cols();
        if let Some(l) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {c} classes"
            )));
        }
        Ok(ScoreMatrix {
            scores,
            labels,
            sample_ids,
            source_tag: source_tag.into(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.scores.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.scores.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.scores.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_ids(&self) -> &[u64] {
        &self.sample_ids
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn with_source_tag(mut self, tag: impl Into<String>) -> Self {
        self.source_tag = tag.into();
        self
    }

    /// Rebuilds the matrix with new score data, keeping labels and ids.
    fn with_scores(&self, data: Vec<f64>, tag: String) -> Result<ScoreMatrix> {
        ScoreMatrix::new(
            Mat::new(self.n_samples(), self.n_classes(), data)?,
            self.labels.clone(),
            self.sample_ids.clone(),
            tag,
        )
    }
}

/// Vote aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleMethod {
    /// Elementwise mean of raw activations.
    RawMean,
    /// Mean of per-row softmax distributions.
    SoftVote,
    /// Mean of one-hot argmax votes.
    HardVote,
}

impl EnsembleMethod {
    pub const ALL: [EnsembleMethod; 3] = [
        EnsembleMethod::RawMean,
        EnsembleMethod::SoftVote,
        EnsembleMethod::HardVote,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EnsembleMethod::RawMean => "raw_mean",
            EnsembleMethod::SoftVote => "soft_vote",
            EnsembleMethod::HardVote => "hard_vote",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ensemble method {name:?}")))
    }
}

fn check_aligned(matrices: &[&ScoreMatrix]) -> Result<()> {
    let first = matrices[0];
    for m in &matrices[1..] {
        if m.n_samples() != first.n_samples() || m.n_classes() != first.n_classes() {
            return Err(Error::Misaligned(format!(
                "{}x{} vs {}x{}",
                m.n_samples(),
                m.n_classes(),
                first.n_samples(),
                first.n_classes()
            )));
        }
        if m.sample_ids != first.sample_ids {
            return Err(Error::Misaligned("sample ids differ".into()));
        }
        if m.labels != first.labels {
            return Err(Error::Misaligned("labels differ".into()));
        }
    }
    Ok(())
}

/// Combines `K >= 1` row-aligned matrices with the chosen voting rule.
///
/// Soft- and hard-vote output rows sum to 1 within 1e-9; hard-vote entries
/// are integer multiples of `1/K`.
pub fn aggregate(matrices: &[&ScoreMatrix], method: EnsembleMethod) -> Result<ScoreMatrix> {
    if matrices.is_empty() {
        return Err(Error::InvalidArgument("aggregate of zero matrices".into()));
    }
    check_aligned(matrices)?;
    let first = matrices[0];
    let (n, c) = (first.n_samples(), first.n_classes());
    let k = matrices.len() as f64;
    let mut data = vec![0.0f64; n * c];
    for m in matrices {
        for i in 0..n {
            let row = m.row(i);
            match method {
                EnsembleMethod::RawMean => {
                    for j in 0..c {
                        data[i * c + j] += row[j];
                    }
                }
                EnsembleMethod::SoftVote => {
                    let p = softmax(row)?;
                    for j in 0..c {
                        data[i * c + j] += p[j];
                    }
                }
                EnsembleMethod::HardVote => {
                    data[i * c + argmax(row)] += 1.0;
                }
            }
        }
    }
    for x in &mut data {
        *x /= k;
    }
    let tag = format!("{}(K={})", method.name(), matrices.len());
    first.with_scores(data, tag)
}

/// Per-row predicted class: argmax with the lowest index winning ties.
pub fn predictions(matrix: &ScoreMatrix) -> Vec<usize> {
    (0..matrix.n_samples())
        .map(|i| argmax(matrix.row(i)))
        .collect()
}

/// Population standard deviation of all entries pooled.
pub fn pooled_std(matrix: &ScoreMatrix) -> f64 {
    let n = (matrix.n_samples() * matrix.n_classes()) as f64;
    let mut sum = 0.0;
    for i in 0..matrix.n_samples() {
        sum += matrix.row(i).iter().sum::<f64>();
    }
    let mean = sum / n;
    let mut var = 0.0;
    for i in 0..matrix.n_samples() {
        for x in matrix.row(i) {
            var += (x - mean) * (x - mean);
        }
    }
    (var / n).sqrt()
}

/// Scales every entry of `target` by `1/sigma`, where `sigma` is the pooled
/// population standard deviation of `train_scores`. After standardizing, the
/// training scores have unit standard deviation; positive scaling preserves
/// every per-row argmax.
pub fn standardize(target: &ScoreMatrix, train_scores: &ScoreMatrix) -> Result<ScoreMatrix> {
    let sigma = pooled_std(train_scores);
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "training scores have degenerate standard deviation {sigma}"
        )));
    }
    let mut data = Vec::with_capacity(target.n_samples() * target.n_classes());
    for i in 0..target.n_samples() {
        data.extend(target.row(i).iter().map(|x| x / sigma));
    }
    let tag = format!("std({})", target.source_tag);
    target.with_scores(data, tag)
}

/// Nonnegative per-source weights summing to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("negative weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(WeightVector(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Elementwise weighted sum of aligned (typically standardized) matrices.
pub fn weighted_mix(sources: &[&ScoreMatrix], weights: &WeightVector) -> Result<ScoreMatrix> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("weighted_mix of zero sources".into()));
    }
    if sources.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} sources vs {} weights",
            sources.len(),
            weights.len()
        )));
    }
    check_aligned(sources)?;
    let first = sources[0];
    let (n, c) = (first.n_samples(), first.n_classes());
    let mut data = vec![0.0f64; n * c];
    for (m, &w) in sources.iter().zip(weights.as_slice()) {
        for i in 0..n {
            for (j, x) in m.row(i).iter().enumerate() {
                data[i * c + j] += w * x;
            }
        }
    }
    first.with_scores(data, format!("mix(K={})", sources.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn matrix_from(
        rows: &[&[f64]],
        labels: &[usize],
        tag: &str,
    ) -> ScoreMatrix {
        let c = rows[0].len();
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        ScoreMatrix::new(
            Mat::new(rows.len(), c, data).unwrap(),
            labels.to_vec(),
            (0..rows.len() as u64).collect(),
            tag,
        )
        .unwrap()
    }

    #[test]
    fn single_voter_is_identical_across_methods() {
        let m = matrix_from(&[&[0.3, 1.2, -0.5], &[2.0, 0.1, 0.2]], &[1, 0], "a");
        let base = predictions(&m);
        for method in EnsembleMethod::ALL {
            let agg = aggregate(&[&m], method).unwrap();
            assert_eq!(predictions(&agg), base, "{method:?}");
        }
    }

    #[test]
    fn hard_vote_counts_argmax_votes() {
        // Three 2-class voters with per-row argmaxes (1, 1, 0).
        let a = matrix_from(&[&[0.1, 0.9]], &[1], "a");
        let b = matrix_from(&[&[0.2, 0.8]], &[1], "b");
        let c = matrix_from(&[&[0.7, 0.3]], &[1], "c");
        let h = aggregate(&[&a, &b, &c], EnsembleMethod::HardVote).unwrap();
        assert!((h.row(0)[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((h.row(0)[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(predictions(&h), vec![1]);
    }

    #[test]
    fn raw_mean_of_identical_matrices_is_idempotent() {
        let m = matrix_from(&[&[0.3, -1.0], &[0.7, 0.2]], &[0, 0], "a");
        let agg = aggregate(&[&m, &m, &m], EnsembleMethod::RawMean).unwrap();
        for i in 0..m.n_samples() {
            for (x, y) in agg.row(i).iter().zip(m.row(i)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn misaligned_inputs_are_rejected() {
        let a = matrix_from(&[&[0.1, 0.9]], &[1], "a");
        let b = matrix_from(&[&[0.2, 0.8]], &[0], "b");
        assert!(aggregate(&[&a, &b], EnsembleMethod::RawMean).is_err());
        assert!(aggregate(&[], EnsembleMethod::RawMean).is_err());
    }

    #[test]
    fn predictions_break_ties_low() {
        let m = matrix_from(&[&[0.2, 0.2]], &[0], "a");
        assert_eq!(predictions(&m), vec![0]);
    }

    #[test]
    fn softmax_transform_preserves_predictions() {
        let m = matrix_from(&[&[0.3, 1.2, -0.5], &[2.0, 0.1, 0.2]], &[1, 0], "a");
        let soft = aggregate(&[&m], EnsembleMethod::SoftVote).unwrap();
        assert_eq!(predictions(&soft), predictions(&m));
    }

    #[test]
    fn standardize_divides_by_pooled_std() {
        // Training scores {2, -2, 2, -2} pooled std = 2.
        let train = matrix_from(&[&[2.0, -2.0], &[2.0, -2.0]], &[0, 0], "t");
        assert!((pooled_std(&train) - 2.0).abs() < 1e-12);
        let target = matrix_from(&[&[1.0, 3.0]], &[1], "x");
        let out = standardize(&target, &train).unwrap();
        assert!((out.row(0)[0] - 0.5).abs() < 1e-12);
        assert!((out.row(0)[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn standardize_is_idempotent_against_a_standardized_train_set() {
        let train = matrix_from(&[&[2.0, -2.0], &[2.0, -2.0]], &[0, 0], "t");
        let std_train = standardize(&train, &train).unwrap();
        let target = matrix_from(&[&[1.0, 3.0]], &[1], "x");
        let once = standardize(&target, &std_train).unwrap();
        for (a, b) in once.row(0).iter().zip(target.row(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_rejects_constant_training_scores() {
        let train = matrix_from(&[&[1.0, 1.0]], &[0], "t");
        let target = matrix_from(&[&[1.0, 3.0]], &[1], "x");
        assert!(standardize(&target, &train).is_err());
    }

    #[test]
    fn degenerate_weight_reproduces_a_single_source() {
        let a = matrix_from(&[&[0.4, 0.6], &[0.9, 0.1]], &[1, 0], "a");
        let b = matrix_from(&[&[0.8, 0.2], &[0.3, 0.7]], &[1, 0], "b");
        let w = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let mix = weighted_mix(&[&a, &b], &w).unwrap();
        assert_eq!(predictions(&mix), predictions(&a));
    }

    #[test]
    fn uniform_weights_match_raw_mean() {
        let a = matrix_from(&[&[0.4, 0.6], &[0.9, 0.1]], &[1, 0], "a");
        let b = matrix_from(&[&[0.8, 0.2], &[0.3, 0.7]], &[1, 0], "b");
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let mix = weighted_mix(&[&a, &b], &w).unwrap();
        let mean = aggregate(&[&a, &b], EnsembleMethod::RawMean).unwrap();
        for i in 0..2 {
            for (x, y) in mix.row(i).iter().zip(mean.row(i)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_weight_vectors_are_rejected() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
    }
}
