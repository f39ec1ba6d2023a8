//! `head-ensemble`: per frozen encoder, retrain several classifier heads and
//! compare the head ensemble against the original single classifier.

use rayon::prelude::*;

use pointens::ensemble::{aggregate, predictions, EnsembleMethod, ScoreMatrix};
use pointens::evaluate::metrics_report;
use pointens::models::{
    predict_scores, retrain_classifier, train_batch, ModelArch, SeedRoots, TrainSpec,
    HEAD_RETRAIN_EPOCHS,
};
use pointens::numerics::derive_seed;

use crate::commands::{ensure_out_dir, load_dataset_and_split, parse_family};
use crate::config::{train_config, ConfigMap};
use crate::report::{fmt_metric, Report};
use crate::{CliError, CliResult, CommonArgs};

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn run(args: &CommonArgs) -> CliResult {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let allowed =
        crate::commands::dataset_train_keys(&["arch", "n_encoders", "n_heads", "head_epochs"]);
    cfg.check_keys(&allowed)?;

    let family = parse_family(&cfg.get_str("arch", "pointnet_lite"))?;
    let n_encoders = cfg.get_usize("n_encoders", 10)?;
    let n_heads = cfg.get_usize("n_heads", 5)?;
    let head_epochs = cfg.get_usize("head_epochs", HEAD_RETRAIN_EPOCHS)?;
    if n_encoders == 0 || n_heads == 0 || head_epochs == 0 {
        return Err(CliError::Config(
            "n_encoders, n_heads, and head_epochs must be at least 1".into(),
        ));
    }
    let train_cfg = train_config(&cfg)?;
    let (dataset, split) = load_dataset_and_split(&cfg, &args.out)?;
    let arch = ModelArch::preset(family, dataset.n_classes());

    let roots = SeedRoots::from_master(derive_seed(args.seed, 80));
    let jobs: Vec<TrainSpec> = (0..n_encoders)
        .map(|i| TrainSpec {
            arch: arch.clone(),
            train_indices: split.train.clone(),
            seeds: roots.bundle_for_instance(i as u64),
            cfg: train_cfg,
        })
        .collect();
    let encoders = train_batch(&dataset, &jobs)?;

    let head_seed_root = derive_seed(args.seed, 81);
    let mut single_inst = Vec::with_capacity(n_encoders);
    let mut single_class = Vec::with_capacity(n_encoders);
    let mut ens_inst = Vec::with_capacity(n_encoders);
    let mut ens_class = Vec::with_capacity(n_encoders);
    for (e, model) in encoders.iter().enumerate() {
        let own = predict_scores(model, &dataset, &split.test)?;
        let own_report = metrics_report(&predictions(&own), own.labels(), own.n_classes())?;
        single_inst.push(own_report.instance_accuracy);
        single_class.push(own_report.mean_class_accuracy);

        let heads = (0..n_heads)
            .into_par_iter()
            .map(|h| {
                let head_seed = head_seed_root.wrapping_add((e * n_heads + h) as u64);
                retrain_classifier(model, &dataset, &split.train, head_seed, head_epochs)
            })
            .collect::<pointens::Result<Vec<_>>>()?;
        for head in &heads {
            if head.encoder_params() != model.encoder_params() {
                return Err(CliError::Runtime(
                    "retrained head modified its frozen encoder".into(),
                ));
            }
        }
        let head_scores: Vec<ScoreMatrix> = heads
            .iter()
            .map(|h| predict_scores(h, &dataset, &split.test))
            .collect::<pointens::Result<_>>()?;
        let refs: Vec<&ScoreMatrix> = head_scores.iter().collect();
        let combined = aggregate(&refs, EnsembleMethod::RawMean)?;
        let ens =
            metrics_report(&predictions(&combined), combined.labels(), combined.n_classes())?;
        ens_inst.push(ens.instance_accuracy);
        ens_class.push(ens.mean_class_accuracy);
    }

    let inst_increase: Vec<f64> = ens_inst
        .iter()
        .zip(&single_inst)
        .map(|(e, s)| e - s)
        .collect();
    let class_increase: Vec<f64> = ens_class
        .iter()
        .zip(&single_class)
        .map(|(e, s)| e - s)
        .collect();

    ensure_out_dir(&args.out)?;
    let mut report = Report::new(
        "head-ensemble",
        &cfg.hash(),
        args.seed,
        &[&format!(
            "{n_heads} heads retrained per encoder for {head_epochs} epochs on frozen encoder weights"
        )],
    );
    report.columns(&["parameter", "mean", "std"]);
    for (name, values) in [
        ("instance_acc_single", &single_inst),
        ("instance_acc_head_ensemble", &ens_inst),
        ("class_acc_single", &single_class),
        ("class_acc_head_ensemble", &ens_class),
        ("instance_acc_increase", &inst_increase),
        ("class_acc_increase", &class_increase),
    ] {
        let (mean, std) = mean_std(values);
        report.row(&[name.to_string(), fmt_metric(mean), fmt_metric(std)]);
    }
    let path = args.out.join("head_ensemble.csv");
    report.write(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
