//! The eight experiment commands.

pub mod bagging;
pub mod frustum;
pub mod gen_data;
pub mod head_ensemble;
pub mod random_factors;
pub mod simple_ensemble;
pub mod timing;
pub mod weight_search;

use std::path::Path;

use pointens::models::ModelFamily;
use pointens::pointcloud::{read_dataset, LabeledDataset, SplitIndices};

use crate::config::ConfigMap;
use crate::CliError;

/// Loads the dataset named by the `dataset` key and splits off the last
/// `test_per_class` samples of each class as the test set.
pub fn load_dataset_and_split(
    cfg: &ConfigMap,
    out_dir: &Path,
) -> Result<(LabeledDataset, SplitIndices), CliError> {
    let name = cfg.require_str("dataset")?;
    let path = {
        let p = Path::new(&name);
        if p.is_absolute() {
            p.to_path_buf()
        } else if p.exists() {
            p.to_path_buf()
        } else {
            out_dir.join(p)
        }
    };
    let dataset = read_dataset(&path)?;
    let test_per_class = cfg.get_usize("test_per_class", 40)?;
    if test_per_class == 0 {
        return Err(CliError::Config("test_per_class must be at least 1".into()));
    }
    let split = dataset.split_last_per_class(test_per_class)?;
    Ok((dataset, split))
}

pub fn parse_family(name: &str) -> Result<ModelFamily, CliError> {
    ModelFamily::from_name(name).map_err(|e| CliError::Config(e.to_string()))
}

pub fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))
}

/// Shared schema keys for commands that load a dataset and train models.
pub fn dataset_train_keys<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut keys: Vec<&'a str> = vec!["dataset", "test_per_class"];
    keys.extend_from_slice(&crate::config::TRAIN_KEYS);
    keys.extend_from_slice(extra);
    keys
}
