//! `gen-data`: synthetic dataset generation.

use pointens::pointcloud::{generate_dataset, write_dataset, GenSpec, ShapeKind};

use crate::commands::ensure_out_dir;
use crate::config::ConfigMap;
use crate::{CliError, CliResult, CommonArgs};

const KEYS: [&str; 6] = [
    "n_classes",
    "train_per_class",
    "test_per_class",
    "n_points",
    "noise_sigma",
    "file",
];

pub fn run(args: &CommonArgs) -> CliResult {
    let cfg = ConfigMap::load(args.config.as_deref())?;
    cfg.check_keys(&KEYS)?;
    let n_classes = cfg.get_usize("n_classes", 8)?;
    if !(2..=ShapeKind::ALL.len()).contains(&n_classes) {
        return Err(CliError::Config(format!(
            "n_classes must be between 2 and {}, got {n_classes}",
            ShapeKind::ALL.len()
        )));
    }
    let train_per_class = cfg.get_usize("train_per_class", 100)?;
    let test_per_class = cfg.get_usize("test_per_class", 40)?;
    let n_points = cfg.get_usize("n_points", 256)?;
    let noise_sigma = cfg.get_f64("noise_sigma", 0.02)?;
    if train_per_class == 0 || test_per_class == 0 {
        return Err(CliError::Config(
            "train_per_class and test_per_class must be at least 1".into(),
        ));
    }
    if n_points < 8 {
        return Err(CliError::Config(format!(
            "n_points must be at least 8, got {n_points}"
        )));
    }
    if noise_sigma < 0.0 {
        return Err(CliError::Config(format!(
            "noise_sigma must be nonnegative, got {noise_sigma}"
        )));
    }
    let file = cfg.get_str("file", "dataset.pset");

    let spec = GenSpec {
        kinds: ShapeKind::ALL[..n_classes].to_vec(),
        train_per_class,
        test_per_class,
        n_points,
        noise_sigma,
        seed: args.seed,
    };
    let dataset = generate_dataset(&spec)?;
    ensure_out_dir(&args.out)?;
    let path = args.out.join(&file);
    write_dataset(&dataset, &path)?;

    println!("wrote {} ({} samples)", path.display(), dataset.len());
    for (name, count) in dataset.class_names().iter().zip(dataset.class_counts()) {
        println!("  {name}: {count}");
    }
    Ok(())
}
