//! Bagging experiment orchestration.
//!
//! For each requested training-set fraction, `n_instances` models are trained
//! on independent without-replacement splits of the training pool; the
//! with-replacement (bootstrap) and full-set ("simple ensemble") variants are
//! run alongside. Instances are aggregated by raw-mean voting and compared
//! against the mean single-instance accuracy.

use super::{aggregate, predictions, EnsembleMethod, ScoreMatrix};
use crate::error::{Error, Result};
use crate::evaluate::metrics_report;
use crate::models::{predict_scores, train_batch, ModelArch, SeedRoots, TrainConfig, TrainSpec};
use crate::numerics::derive_seed;
use crate::pointcloud::{make_split_indices, BagMode, BaggingSpec, LabeledDataset, SplitIndices};

/// One (variant, fraction) result row.
#[derive(Debug, Clone)]
pub struct BaggingRow {
    /// `without_replacement`, `with_replacement`, or `simple`.
    pub variant: String,
    /// Training fraction; 1.0 for the with-replacement and simple variants.
    pub fraction: f64,
    pub single_instance_acc_mean: f64,
    pub ensemble_instance_acc: f64,
    pub instance_gain: f64,
    pub single_class_acc_mean: f64,
    pub ensemble_class_acc: f64,
    pub class_gain: f64,
}

/// Full report: one row per without-replacement fraction plus one row each
/// for the with-replacement and simple variants.
#[derive(Debug, Clone)]
pub struct BaggingReport {
    pub n_instances: usize,
    pub rows: Vec<BaggingRow>,
}

fn evaluate_variant(
    dataset: &LabeledDataset,
    split: &SplitIndices,
    arch: &ModelArch,
    cfg: &TrainConfig,
    mode: BagMode,
    n_instances: usize,
    seed_root: u64,
    variant_salt: u64,
) -> Result<(f64, f64, f64, f64)> {
    let pool = &split.train;
    let mut jobs = Vec::with_capacity(n_instances);
    for i in 0..n_instances {
        let split_seed = derive_seed(seed_root, variant_salt * 1000 + i as u64);
        let draw = make_split_indices(pool.len(), &BaggingSpec { mode, seed: split_seed })?;
        let train_indices: Vec<usize> = draw.into_iter().map(|j| pool[j]).collect();
        let roots = SeedRoots::from_master(derive_seed(seed_root, variant_salt * 2000 + i as u64));
        jobs.push(TrainSpec {
            arch: arch.clone(),
            train_indices,
            seeds: roots.bundle_for_instance(0),
            cfg: *cfg,
        });
    }
    let models = train_batch(dataset, &jobs)?;
    let score_matrices: Vec<ScoreMatrix> = models
        .iter()
        .map(|m| predict_scores(m, dataset, &split.test))
        .collect::<Result<_>>()?;

    let mut single_instance = 0.0;
    let mut single_class = 0.0;
    for m in &score_matrices {
        let report = metrics_report(&predictions(m), m.labels(), m.n_classes())?;
        single_instance += report.instance_accuracy;
        single_class += report.mean_class_accuracy;
    }
    single_instance /= score_matrices.len() as f64;
    single_class /= score_matrices.len() as f64;

    let refs: Vec<&ScoreMatrix> = score_matrices.iter().collect();
    let combined = aggregate(&refs, EnsembleMethod::RawMean)?;
    let ens = metrics_report(&predictions(&combined), combined.labels(), combined.n_classes())?;
    Ok((
        single_instance,
        ens.instance_accuracy,
        single_class,
        ens.mean_class_accuracy,
    ))
}

/// Runs the full bagging protocol and returns one gain row per variant.
pub fn run_bagging_experiment(
    dataset: &LabeledDataset,
    split: &SplitIndices,
    arch: &ModelArch,
    cfg: &TrainConfig,
    fractions: &[f64],
    n_instances: usize,
    seed_root: u64,
) -> Result<BaggingReport> {
    if n_instances == 0 {
        return Err(Error::InvalidArgument("n_instances = 0".into()));
    }
    if let Some(&f) = fractions.iter().find(|&&f| f <= 0.0 || f > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fraction {f} outside (0, 1]"
        )));
    }
    let mut rows = Vec::new();
    for (fi, &fraction) in fractions.iter().enumerate() {
        let (s_inst, e_inst, s_class, e_class) = evaluate_variant(
            dataset,
            split,
            arch,
            cfg,
            BagMode::WithoutReplacement(fraction),
            n_instances,
            seed_root,
            fi as u64 + 1,
        )?;
        rows.push(BaggingRow {
            variant: "without_replacement".into(),
            fraction,
            single_instance_acc_mean: s_inst,
            ensemble_instance_acc: e_inst,
            instance_gain: e_inst - s_inst,
            single_class_acc_mean: s_class,
            ensemble_class_acc: e_class,
            class_gain: e_class - s_class,
        });
    }
    for (variant, mode, salt) in [
        ("with_replacement", BagMode::WithReplacement, 900u64),
        ("simple", BagMode::Full, 901),
    ] {
        let (s_inst, e_inst, s_class, e_class) = evaluate_variant(
            dataset,
            split,
            arch,
            cfg,
            mode,
            n_instances,
            seed_root,
            salt,
        )?;
        rows.push(BaggingRow {
            variant: variant.into(),
            fraction: 1.0,
            single_instance_acc_mean: s_inst,
            ensemble_instance_acc: e_inst,
            instance_gain: e_inst - s_inst,
            single_class_acc_mean: s_class,
            ensemble_class_acc: e_class,
            class_gain: e_class - s_class,
        });
    }
    Ok(BaggingReport { n_instances, rows })
}
