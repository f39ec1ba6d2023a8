//! `bagging`: without-replacement splits over a fraction sweep, plus the
//! with-replacement and simple-ensemble baselines.

use pointens::ensemble::run_bagging_experiment;
use pointens::models::ModelArch;
use pointens::numerics::derive_seed;

use crate::commands::{ensure_out_dir, load_dataset_and_split, parse_family};
use crate::config::{train_config, ConfigMap};
use crate::report::{fmt_metric, Report};
use crate::{CliError, CliResult, CommonArgs};

const DEFAULT_FRACTIONS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

pub fn run(args: &CommonArgs) -> CliResult {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    let allowed = crate::commands::dataset_train_keys(&["arch", "fractions", "n_instances"]);
    cfg.check_keys(&allowed)?;

    let family = parse_family(&cfg.get_str("arch", "pointnet_lite"))?;
    let fractions = cfg.get_f64_list("fractions", &DEFAULT_FRACTIONS)?;
    if fractions.is_empty() {
        return Err(CliError::Config("fractions must not be empty".into()));
    }
    if let Some(&f) = fractions.iter().find(|&&f| f <= 0.0 || f > 1.0) {
        return Err(CliError::Config(format!(
            "fractions must lie in (0, 1], got {f}"
        )));
    }
    let n_instances = cfg.get_usize("n_instances", 10)?;
    if n_instances == 0 {
        return Err(CliError::Config("n_instances must be at least 1".into()));
    }
    let train_cfg = train_config(&cfg)?;
    let (dataset, split) = load_dataset_and_split(&cfg, &args.out)?;
    let arch = ModelArch::preset(family, dataset.n_classes());

    let report_data = run_bagging_experiment(
        &dataset,
        &split,
        &arch,
        &train_cfg,
        &fractions,
        n_instances,
        derive_seed(args.seed, 60),
    )?;

    ensure_out_dir(&args.out)?;
    let mut report = Report::new(
        "bagging",
        &cfg.hash(),
        args.seed,
        &[
            "expected trend: the biggest gain at the smallest training fraction, best overall accuracy for the simple ensemble",
            "variant `simple` trains every instance on the full training set",
        ],
    );
    report.columns(&[
        "variant",
        "fraction",
        "n_instances",
        "single_instance_acc_mean",
        "ensemble_instance_acc",
        "instance_gain",
        "single_class_acc_mean",
        "ensemble_class_acc",
        "class_gain",
    ]);
    for row in &report_data.rows {
        report.row(&[
            row.variant.clone(),
            fmt_metric(row.fraction),
            report_data.n_instances.to_string(),
            fmt_metric(row.single_instance_acc_mean),
            fmt_metric(row.ensemble_instance_acc),
            fmt_metric(row.instance_gain),
            fmt_metric(row.single_class_acc_mean),
            fmt_metric(row.ensemble_class_acc),
            fmt_metric(row.class_gain),
        ]);
    }
    let path = args.out.join("bagging.csv");
    report.write(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
