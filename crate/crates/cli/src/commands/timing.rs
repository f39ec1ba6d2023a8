//! `timing`: parameter counts and wall-clock batch inference statistics per
//! architecture. The wall-clock columns vary run to run; everything else in
//! the report is deterministic.

use pointens::models::{param_count, time_inference, train, ModelArch, SeedBundle, TrainConfig};
use pointens::numerics::{derive_seed, Rng};
use pointens::pointcloud::{generate_dataset, generate_shape, GenSpec, PointCloud, ShapeKind};

use crate::commands::{ensure_out_dir, parse_family};
use crate::config::ConfigMap;
use crate::report::Report;
use crate::{CliError, CliResult, CommonArgs};

const KEYS: [&str; 5] = ["families", "repetitions", "n_points", "batch", "train_epochs"];

pub fn run(args: &CommonArgs) -> CliResult {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    cfg.check_keys(&KEYS)?;
    let families = cfg.get_str_list(
        "families",
        &["deepsets_lite", "pointnet_lite", "hier_lite"],
    );
    let repetitions = cfg.get_usize("repetitions", 10)?;
    if repetitions < 3 {
        return Err(CliError::Config(format!(
            "repetitions must be at least 3, got {repetitions}"
        )));
    }
    let n_points = cfg.get_usize("n_points", 256)?;
    if n_points < 8 {
        return Err(CliError::Config(format!(
            "n_points must be at least 8, got {n_points}"
        )));
    }
    let batch_size = cfg.get_usize("batch", 4)?;
    if batch_size == 0 {
        return Err(CliError::Config("batch must be at least 1".into()));
    }
    let train_epochs = cfg.get_usize("train_epochs", 1)?;
    if train_epochs == 0 {
        return Err(CliError::Config("train_epochs must be at least 1".into()));
    }

    // A small dataset, just enough to produce trained models to time.
    let dataset = generate_dataset(&GenSpec {
        kinds: ShapeKind::ALL.to_vec(),
        train_per_class: 4,
        test_per_class: 1,
        n_points,
        noise_sigma: 0.02,
        seed: derive_seed(args.seed, 95),
    })?;
    let split = dataset.split_last_per_class(1).map_err(CliError::from)?;
    let train_cfg = TrainConfig {
        epochs: train_epochs,
        batch_size: 8,
        ..TrainConfig::default()
    };

    let mut batch_rng = Rng::new(derive_seed(args.seed, 96));
    let batch: Vec<PointCloud> = (0..batch_size)
        .map(|i| {
            generate_shape(
                ShapeKind::ALL[i % ShapeKind::ALL.len()],
                n_points,
                0.02,
                &mut batch_rng,
            )
        })
        .collect::<pointens::Result<_>>()?;

    ensure_out_dir(&args.out)?;
    let mut report = Report::new(
        "timing",
        &cfg.hash(),
        args.seed,
        &[
            &format!("batch of {batch_size} clouds, {n_points} points each; one warm-up repetition excluded"),
            "wall-clock columns vary between runs; param_count and repetitions are deterministic",
        ],
    );
    report.columns(&[
        "family",
        "param_count",
        "repetitions",
        "mean_s",
        "min_s",
        "max_s",
    ]);
    for (fi, name) in families.iter().enumerate() {
        let family = parse_family(name)?;
        let arch = ModelArch::preset(family, dataset.n_classes());
        let seeds = SeedBundle::new(
            derive_seed(args.seed, 970 + fi as u64),
            derive_seed(args.seed, 980 + fi as u64),
            derive_seed(args.seed, 990 + fi as u64),
        );
        let model = train(&arch, &dataset, &split.train, seeds, &train_cfg)?;
        let timing = time_inference(&model, &batch, repetitions)?;
        report.row(&[
            name.clone(),
            param_count(&model).to_string(),
            timing.repetitions.to_string(),
            format!("{:.6}", timing.mean_s),
            format!("{:.6}", timing.min_s),
            format!("{:.6}", timing.max_s),
        ]);
    }
    let path = args.out.join("timing.csv");
    report.write(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
