//! `weight-search`: standardize each architecture's scores and grid-search
//! constrained mixing weights on the simplex lattice.
//!
//! By default each architecture contributes a raw-mean sub-ensemble of its
//! instances; `mode = single` mixes one instance per architecture instead.
//! The report labels which was used.

use pointens::ensemble::{
    aggregate, predictions, standardize, weight_grid_search, EnsembleMethod, ScoreMatrix,
    WeightRange,
};
use pointens::evaluate::metrics_report;
use pointens::models::{predict_scores, train_batch, ModelArch, SeedRoots, TrainSpec};
use pointens::numerics::derive_seed;

use crate::commands::{ensure_out_dir, load_dataset_and_split, parse_family};
use crate::config::{train_config, ConfigMap};
use crate::report::{fmt_metric, Report};
use crate::{CliError, CliResult, CommonArgs};

pub fn run(args: &CommonArgs) -> CliResult {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let families = cfg.get_str_list(
        "families",
        &["deepsets_lite", "pointnet_lite", "hier_lite"],
    );
    if families.len() < 2 {
        return Err(CliError::Config(
            "weight search needs at least 2 families".into(),
        ));
    }
    let mut constraint_keys: Vec<String> = Vec::new();
    for f in &families {
        constraint_keys.push(format!("min_{f}"));
        constraint_keys.push(format!("max_{f}"));
    }
    let mut allowed = crate::commands::dataset_train_keys(&[
        "families",
        "n_instances_per_family",
        "grid_step",
        "mode",
        "top_n",
    ]);
    allowed.extend(constraint_keys.iter().map(String::as_str));
    cfg.check_keys(&allowed)?;

    let n_per_family = cfg.get_usize("n_instances_per_family", 5)?;
    if n_per_family == 0 {
        return Err(CliError::Config(
            "n_instances_per_family must be at least 1".into(),
        ));
    }
    let grid_step = cfg.get_f64("grid_step", 0.05)?;
    let mode = cfg.get_str("mode", "subensemble");
    if mode != "subensemble" && mode != "single" {
        return Err(CliError::Config(format!(
            "mode must be `subensemble` or `single`, got {mode:?}"
        )));
    }
    let top_n = cfg.get_usize("top_n", 25)?;
    let mut constraints = Vec::with_capacity(families.len());
    for f in &families {
        let min = cfg.get_f64_opt(&format!("min_{f}"))?.unwrap_or(0.0);
        let max = cfg.get_f64_opt(&format!("max_{f}"))?.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&min) || !(0.0..=1.0).contains(&max) || min > max {
            return Err(CliError::Config(format!(
                "constraint for {f} must satisfy 0 <= min <= max <= 1, got [{min}, {max}]"
            )));
        }
        constraints.push(WeightRange { min, max });
    }
    let train_cfg = train_config(&cfg)?;
    let (dataset, split) = load_dataset_and_split(&cfg, &args.out)?;

    // Per family: train instances, collect train-side and test-side scores.
    let mut sources: Vec<ScoreMatrix> = Vec::with_capacity(families.len());
    let mut single_accs: Vec<f64> = Vec::with_capacity(families.len());
    for (fi, name) in families.iter().enumerate() {
        let family = parse_family(name)?;
        let arch = ModelArch::preset(family, dataset.n_classes());
        let roots = SeedRoots::from_master(derive_seed(args.seed, 300 + fi as u64));
        let jobs: Vec<TrainSpec> = (0..n_per_family)
            .map(|i| TrainSpec {
                arch: arch.clone(),
                train_indices: split.train.clone(),
                seeds: roots.bundle_for_instance(i as u64),
                cfg: train_cfg,
            })
            .collect();
        let models = train_batch(&dataset, &jobs)?;
        let used = if mode == "single" { 1 } else { models.len() };
        let train_mats: Vec<ScoreMatrix> = models[..used]
            .iter()
            .map(|m| predict_scores(m, &dataset, &split.train))
            .collect::<pointens::Result<_>>()?;
        let test_mats: Vec<ScoreMatrix> = models[..used]
            .iter()
            .map(|m| predict_scores(m, &dataset, &split.test))
            .collect::<pointens::Result<_>>()?;
        let train_refs: Vec<&ScoreMatrix> = train_mats.iter().collect();
        let test_refs: Vec<&ScoreMatrix> = test_mats.iter().collect();
        let train_agg = aggregate(&train_refs, EnsembleMethod::RawMean)?;
        let test_agg = aggregate(&test_refs, EnsembleMethod::RawMean)?;
        let standardized = standardize(&test_agg, &train_agg)?.with_source_tag(name.clone());
        let own = metrics_report(
            &predictions(&standardized),
            standardized.labels(),
            standardized.n_classes(),
        )?;
        single_accs.push(own.instance_accuracy);
        sources.push(standardized);
    }

    let candidates = weight_grid_search(&sources, grid_step, &constraints)?;

    ensure_out_dir(&args.out)?;
    let mut report = Report::new(
        "weight-search",
        &cfg.hash(),
        args.seed,
        &[
            &format!(
                "mode: {mode} ({} per-architecture source matrices, standardized to unit training std)",
                if mode == "single" {
                    "single instances as"
                } else {
                    "raw-mean sub-ensembles as"
                }
            ),
            "instance_acc_mean averages the single accuracies of sources with nonzero weight",
        ],
    );
    let mut cols: Vec<String> = vec!["rank".into()];
    cols.extend(families.iter().map(|f| format!("k_{f}")));
    cols.extend(
        ["instance_acc_mean", "instance_acc_ensemble", "class_acc_mean", "class_acc_ensemble"]
            .iter()
            .map(|s| s.to_string()),
    );
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    report.columns(&col_refs);

    // Mean single-architecture class accuracy column needs per-source class
    // accuracy too.
    let single_class_accs: Vec<f64> = sources
        .iter()
        .map(|s| {
            metrics_report(&predictions(s), s.labels(), s.n_classes())
                .map(|r| r.mean_class_accuracy)
        })
        .collect::<pointens::Result<_>>()?;

    for (rank, cand) in candidates.iter().take(top_n).enumerate() {
        let active: Vec<usize> = cand
            .weights
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i)
            .collect();
        let mean_inst =
            active.iter().map(|&i| single_accs[i]).sum::<f64>() / active.len() as f64;
        let mean_class =
            active.iter().map(|&i| single_class_accs[i]).sum::<f64>() / active.len() as f64;
        let mut fields = vec![(rank + 1).to_string()];
        fields.extend(cand.weights.as_slice().iter().map(|w| fmt_metric(*w)));
        fields.push(fmt_metric(mean_inst));
        fields.push(fmt_metric(cand.instance_acc));
        fields.push(fmt_metric(mean_class));
        fields.push(fmt_metric(cand.class_acc));
        report.row(&fields);
    }
    let path = args.out.join("weight_search.csv");
    report.write(&path)?;
    println!(
        "wrote {} ({} lattice points evaluated)",
        path.display(),
        candidates.len()
    );
    Ok(())
}
