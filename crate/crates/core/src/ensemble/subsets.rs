//! K-subset combination statistics.
//!
//! Given `n` trained instances, a K-way ensemble can be formed from any of
//! the `C(n, K)` instance combinations. Subsets are enumerated exhaustively
//! in lexicographic order while `C(n, K)` stays under a cap; past the cap, a
//! fixed number of seeded distinct random subsets is drawn instead. Reported
//! standard deviations are population standard deviations.

use super::{aggregate, predictions, EnsembleMethod, ScoreMatrix};
use crate::error::{Error, Result};
use crate::evaluate::metrics_report;
use crate::numerics::Rng;

/// Exhaustive-vs-random subset selection policy.
#[derive(Debug, Clone, Copy)]
pub struct SubsetPolicy {
    /// Enumerate exhaustively while `C(n, K) <= cap`.
    pub cap: usize,
    /// Number of distinct random subsets drawn past the cap.
    pub n_random: usize,
    pub seed: u64,
}

impl Default for SubsetPolicy {
    fn default() -> Self {
        SubsetPolicy {
            cap: 5000,
            n_random: 10,
            seed: 0,
        }
    }
}

/// Mean and population standard deviation of one metric across subsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn from_values(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Result of evaluating every chosen K-subset.
#[derive(Debug, Clone)]
pub struct SubsetEvaluation {
    pub k: usize,
    pub n_subsets: usize,
    pub exhaustive: bool,
    pub instance_acc: Stat,
    pub class_acc: Stat,
}

/// `C(n, k)` without overflow for the sizes used here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result
}

fn combinations_lex(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // Advance to the next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

fn random_distinct_subsets(n: usize, k: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = Rng::new(seed);
    let mut subsets: Vec<Vec<usize>> = Vec::with_capacity(count);
    while subsets.len() < count {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + rng.index(n - i);
            pool.swap(i, j);
        }
        let mut subset: Vec<usize> = pool[..k].to_vec();
        subset.sort_unstable();
        if !subsets.contains(&subset) {
            subsets.push(subset);
        }
    }
    subsets
}

/// Mean and standard deviation of instance accuracy and mean class accuracy
/// over the chosen K-subsets of `matrices`.
pub fn evaluate_k_subsets(
    matrices: &[ScoreMatrix],
    k: usize,
    method: EnsembleMethod,
    policy: &SubsetPolicy,
) -> Result<SubsetEvaluation> {
    let n = matrices.len();
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range for {n} matrices"
        )));
    }
    let total = binomial(n, k);
    let exhaustive = total <= policy.cap as u128;
    let subsets = if exhaustive {
        combinations_lex(n, k)
    } else {
        if policy.n_random == 0 {
            return Err(Error::InvalidArgument("n_random = 0".into()));
        }
        if (policy.n_random as u128) > total {
            return Err(Error::InvalidArgument(format!(
                "cannot draw {} distinct subsets out of {total}",
                policy.n_random
            )));
        }
        random_distinct_subsets(n, k, policy.n_random, policy.seed)
    };

    let mut instance_values = Vec::with_capacity(subsets.len());
    let mut class_values = Vec::with_capacity(subsets.len());
    for subset in &subsets {
        let selected: Vec<&ScoreMatrix> = subset.iter().map(|&i| &matrices[i]).collect();
        let combined = aggregate(&selected, method)?;
        let preds = predictions(&combined);
        let report = metrics_report(&preds, combined.labels(), combined.n_classes())?;
        instance_values.push(report.instance_accuracy);
        class_values.push(report.mean_class_accuracy);
    }
    Ok(SubsetEvaluation {
        k,
        n_subsets: subsets.len(),
        exhaustive,
        instance_acc: Stat::from_values(&instance_values),
        class_acc: Stat::from_values(&class_values),
    })
}
