//! Deterministic seeded training.
//!
//! One training run is a pure function of (architecture, dataset, indices,
//! seeds, config). The three random factors are isolated: epoch shuffling and
//! augmentation consume only the `data_order` stream, initialization only the
//! `init` stream, dropout masks only the `dropout` stream. Fixing a seed
//! fixes that factor across instances.

use rayon::prelude::*;

use super::net::{head_loss_and_grad, sample_loss_and_grad};
use super::{ModelArch, SeedBundle, TrainConfig, TrainRecord, TrainedModel};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, DropoutMask, Rng};
use crate::pointcloud::{augment, LabeledDataset};

fn check_train_inputs(
    arch: &ModelArch,
    dataset: &LabeledDataset,
    train_indices: &[usize],
    cfg: &TrainConfig,
) -> Result<()> {
    arch.validate()?;
    if dataset.n_classes() != arch.n_classes() {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} classes, architecture outputs {}",
            dataset.n_classes(),
            arch.n_classes()
        )));
    }
    if train_indices.is_empty() {
        return Err(Error::InvalidArgument("no training indices".into()));
    }
    if let Some(&i) = train_indices.iter().find(|&&i| i >= dataset.len()) {
        return Err(Error::InvalidArgument(format!(
            "training index {i} out of range"
        )));
    }
    if cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    if cfg.learning_rate <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "learning rate {}",
            cfg.learning_rate
        )));
    }
    Ok(())
}

fn mean_loss(
    arch: &ModelArch,
    params: &[f64],
    dataset: &LabeledDataset,
    indices: &[usize],
) -> Result<f64> {
    let mut total = 0.0;
    for &i in indices {
        let (loss, _) = sample_loss_and_grad(arch, params, dataset.cloud(i), dataset.label(i), None)?;
        total += loss;
    }
    Ok(total / indices.len() as f64)
}

/// SGD-with-momentum loop shared by full training and head retraining.
/// `grad_of_sample` returns the per-sample loss and a gradient of
/// `params[param_lo..]`; only that suffix is updated.
#[allow(clippy::too_many_arguments)]
fn sgd_loop<F>(
    arch: &ModelArch,
    params: &mut Vec<f64>,
    param_lo: usize,
    dataset: &LabeledDataset,
    train_indices: &[usize],
    cfg: &TrainConfig,
    data_rng: &mut Rng,
    dropout_rng: &mut Rng,
    mut grad_of_sample: F,
) -> Result<f64>
where
    F: FnMut(&ModelArch, &[f64], &crate::pointcloud::PointCloud, usize, Option<&DropoutMask>) -> Result<(f64, Vec<f64>)>,
{
    let rho_layout = arch.rho_layout();
    let span = params.len() - param_lo;
    let mut velocity = vec![0.0f64; span];
    let mut final_epoch_loss = 0.0;
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.lr_decay.powi(epoch as i32);
        let mut order = train_indices.to_vec();
        data_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grad_accum = vec![0.0f64; span];
            let mut batch_loss = 0.0;
            for &i in batch {
                let cloud = augment(dataset.cloud(i), data_rng);
                let mask = if arch.dropout_rate > 0.0 {
                    Some(DropoutMask::sample(&rho_layout, arch.dropout_rate, dropout_rng)?)
                } else {
                    None
                };
                let (loss, grad) =
                    grad_of_sample(arch, params, &cloud, dataset.label(i), mask.as_ref())?;
                batch_loss += loss;
                for (acc, g) in grad_accum.iter_mut().zip(&grad) {
                    *acc += g;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                    detail: format!("batch loss {batch_loss}"),
                });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            for ((p, v), g) in params[param_lo..]
                .iter_mut()
                .zip(&mut velocity)
                .zip(&grad_accum)
            {
                *v = cfg.momentum * *v - lr * g * scale;
                *p += *v;
            }
        }
        final_epoch_loss = epoch_loss / order.len() as f64;
    }
    Ok(final_epoch_loss)
}

/// Trains one model instance. Deterministic given every argument; identical
/// calls produce bit-identical parameter vectors.
pub fn train(
    arch: &ModelArch,
    dataset: &LabeledDataset,
    train_indices: &[usize],
    seeds: SeedBundle,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    check_train_inputs(arch, dataset, train_indices, cfg)?;
    let mut init_rng = Rng::new(seeds.init);
    let mut params = arch.init_params(&mut init_rng);
    let initial_loss = mean_loss(arch, &params, dataset, train_indices)?;
    let mut data_rng = Rng::new(seeds.data_order);
    let mut dropout_rng = Rng::new(seeds.dropout);
    let final_loss = sgd_loop(
        arch,
        &mut params,
        0,
        dataset,
        train_indices,
        cfg,
        &mut data_rng,
        &mut dropout_rng,
        |arch, params, cloud, label, mask| sample_loss_and_grad(arch, params, cloud, label, mask),
    )?;
    TrainedModel::assemble(
        arch.clone(),
        params,
        seeds,
        Some(TrainRecord {
            epochs: cfg.epochs,
            final_loss,
            initial_loss,
        }),
    )
}

/// One training job for [`train_batch`].
#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub arch: ModelArch,
    pub train_indices: Vec<usize>,
    pub seeds: SeedBundle,
    pub cfg: TrainConfig,
}

/// Trains independent instances in parallel. Results keep job order, so the
/// output is deterministic regardless of scheduling.
pub fn train_batch(dataset: &LabeledDataset, jobs: &[TrainSpec]) -> Result<Vec<TrainedModel>> {
    jobs.par_iter()
        .map(|job| train(&job.arch, dataset, &job.train_indices, job.seeds, &job.cfg))
        .collect()
}

/// Number of epochs the head-retraining protocol uses by default.
pub const HEAD_RETRAIN_EPOCHS: usize = 31;

/// Retrains only the classifier head on top of a frozen encoder.
///
/// The encoder slice of the returned model is bit-identical to the input
/// model's; only the `rho` slice changes. The head's data-order, init, and
/// dropout streams are derived from `classifier_seed` (streams 0, 1, 2 of
/// [`derive_seed`]), so one seed fully determines the retrained head.
pub fn retrain_classifier(
    model: &TrainedModel,
    dataset: &LabeledDataset,
    train_indices: &[usize],
    classifier_seed: u64,
    epochs: usize,
) -> Result<TrainedModel> {
    let arch = &model.arch;
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    check_train_inputs(arch, dataset, train_indices, &cfg)?;
    let head_seeds = SeedBundle {
        data_order: derive_seed(classifier_seed, 0),
        init: derive_seed(classifier_seed, 1),
        dropout: derive_seed(classifier_seed, 2),
    };
    let split = arch.encoder_param_len();
    let mut params = model.params.clone();
    let mut init_rng = Rng::new(head_seeds.init);
    let fresh_rho = arch.rho_layout().init_params(&mut init_rng);
    params[split..].copy_from_slice(&fresh_rho);

    let initial_loss = mean_loss(arch, &params, dataset, train_indices)?;
    let mut data_rng = Rng::new(head_seeds.data_order);
    let mut dropout_rng = Rng::new(head_seeds.dropout);
    let final_loss = sgd_loop(
        arch,
        &mut params,
        split,
        dataset,
        train_indices,
        &cfg,
        &mut data_rng,
        &mut dropout_rng,
        |arch, params, cloud, label, mask| head_loss_and_grad(arch, params, cloud, label, mask),
    )?;
    TrainedModel::assemble(
        arch.clone(),
        params,
        head_seeds,
        Some(TrainRecord {
            epochs,
            final_loss,
            initial_loss,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelFamily;
    use crate::pointcloud::{generate_dataset, GenSpec, ShapeKind};

    fn tiny_dataset(seed: u64) -> LabeledDataset {
        generate_dataset(&GenSpec {
            kinds: vec![ShapeKind::Sphere, ShapeKind::Cube, ShapeKind::Helix],
            train_per_class: 6,
            test_per_class: 2,
            n_points: 24,
            noise_sigma: 0.03,
            seed,
        })
        .unwrap()
    }

    fn tiny_arch(family: ModelFamily) -> ModelArch {
        let (n_centroids, group_k) = match family {
            ModelFamily::HierLite => (4, 4),
            _ => (0, 0),
        };
        ModelArch {
            family,
            phi_widths: vec![3, 8, 12],
            rho_widths: vec![12, 8, 3],
            dropout_rate: 0.3,
            n_centroids,
            group_k,
        }
    }

    fn tiny_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let ds = tiny_dataset(1);
        let split = ds.split_last_per_class(2).unwrap();
        let arch = tiny_arch(ModelFamily::PointNetLite);
        let seeds = SeedBundle::new(10, 20, 30);
        let a = train(&arch, &ds, &split.train, seeds, &tiny_cfg(2)).unwrap();
        let b = train(&arch, &ds, &split.train, seeds, &tiny_cfg(2)).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn changing_only_the_init_seed_changes_parameters() {
        let ds = tiny_dataset(2);
        let split = ds.split_last_per_class(2).unwrap();
        let arch = tiny_arch(ModelFamily::DeepSetsLite);
        let a = train(&arch, &ds, &split.train, SeedBundle::new(1, 2, 3), &tiny_cfg(1)).unwrap();
        let b = train(&arch, &ds, &split.train, SeedBundle::new(1, 9, 3), &tiny_cfg(1)).unwrap();
        assert_ne!(a.params, b.params);
    }

    #[test]
    fn zero_epochs_is_rejected() {
        let ds = tiny_dataset(3);
        let split = ds.split_last_per_class(2).unwrap();
        let arch = tiny_arch(ModelFamily::PointNetLite);
        let cfg = tiny_cfg(0);
        assert!(train(&arch, &ds, &split.train, SeedBundle::new(0, 0, 0), &cfg).is_err());
    }

    #[test]
    fn loss_decreases_over_the_first_epoch() {
        let ds = tiny_dataset(4);
        let split = ds.split_last_per_class(2).unwrap();
        let arch = tiny_arch(ModelFamily::PointNetLite);
        let model =
            train(&arch, &ds, &split.train, SeedBundle::new(5, 6, 7), &tiny_cfg(1)).unwrap();
        let record = model.train_record.unwrap();
        assert!(
            record.final_loss < record.initial_loss,
            "{} !< {}",
            record.final_loss,
            record.initial_loss
        );
    }

    #[test]
    fn retrained_head_leaves_the_encoder_untouched() {
        let ds = tiny_dataset(5);
        let split = ds.split_last_per_class(2).unwrap();
        let arch = tiny_arch(ModelFamily::PointNetLite);
        let base =
            train(&arch, &ds, &split.train, SeedBundle::new(1, 2, 3), &tiny_cfg(2)).unwrap();
        let retrained = retrain_classifier(&base, &ds, &split.train, 99, 2).unwrap();
        assert_eq!(base.encoder_params(), retrained.encoder_params());
        assert_ne!(base.classifier_params(), retrained.classifier_params());
    }

    #[test]
    fn distinct_head_seeds_give_distinct_heads() {
        let ds = tiny_dataset(6);
        let split = ds.split_last_per_class(2).unwrap();
        let arch = tiny_arch(ModelFamily::DeepSetsLite);
        let base =
            train(&arch, &ds, &split.train, SeedBundle::new(4, 5, 6), &tiny_cfg(1)).unwrap();
        let heads: Vec<TrainedModel> = (0..5)
            .map(|s| retrain_classifier(&base, &ds, &split.train, s, 1).unwrap())
            .collect();
        for i in 0..heads.len() {
            for j in i + 1..heads.len() {
                assert_ne!(
                    heads[i].classifier_params(),
                    heads[j].classifier_params(),
                    "heads {i} and {j} coincide"
                );
            }
        }
        // Same seed twice reproduces the same head.
        let again = retrain_classifier(&base, &ds, &split.train, 0, 1).unwrap();
        assert_eq!(heads[0].params, again.params);
    }

    #[test]
    fn train_batch_matches_sequential_training() {
        let ds = tiny_dataset(7);
        let split = ds.split_last_per_class(2).unwrap();
        let arch = tiny_arch(ModelFamily::PointNetLite);
        let jobs: Vec<TrainSpec> = (0..3)
            .map(|i| TrainSpec {
                arch: arch.clone(),
                train_indices: split.train.clone(),
                seeds: SeedBundle::new(i, i + 10, i + 20),
                cfg: tiny_cfg(1),
            })
            .collect();
        let parallel = train_batch(&ds, &jobs).unwrap();
        for (job, model) in jobs.iter().zip(&parallel) {
            let sequential =
                train(&job.arch, &ds, &job.train_indices, job.seeds, &job.cfg).unwrap();
            assert_eq!(model.params, sequential.params);
        }
    }
}
