//! Three toy direct point-set classifier families with deterministic seeded
//! training, an explicit encoder/classifier separation, serialization, and
//! parameter counting.
//!
//! All three families share one structure: a per-point network `phi`
//! (encoder) whose outputs are pooled into a global signature, followed by a
//! classifier `rho` on the pooled feature. They differ in the pooling:
//!
//! - `deepsets_lite` — shared `phi` per point, **sum** pooling;
//! - `pointnet_lite` — shared `phi` per point, **max** pooling;
//! - `hier_lite` — one sampling level: farthest point sampling picks
//!   centroids, k-NN grouping collects neighborhoods, a local shared MLP and
//!   per-group max pool produce group features, and a global max pool over
//!   groups yields the signature. The cloud is put into canonical
//!   (lexicographic) order first so the whole construction is permutation
//!   invariant bit-for-bit.
//!
//! The flat parameter vector is laid out encoder first, classifier second:
//! all `phi` layers (per layer: row-major `out x in` weights, then biases),
//! then all `rho` layers. `params[..arch.encoder_param_len()]` is the
//! encoder; the rest is the classifier head.

mod io;
mod net;
mod train;

pub use io::{load_model, save_model};
pub use net::sample_loss_and_grad;
pub use train::{retrain_classifier, train, train_batch, TrainSpec, HEAD_RETRAIN_EPOCHS};

use crate::ensemble::ScoreMatrix;
use crate::error::{Error, Result};
use crate::numerics::{mlp_forward, Mat, MlpLayout, Rng};
use crate::pointcloud::{LabeledDataset, PointCloud};

/// The classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    DeepSetsLite,
    PointNetLite,
    HierLite,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [
        ModelFamily::DeepSetsLite,
        ModelFamily::PointNetLite,
        ModelFamily::HierLite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::DeepSetsLite => "deepsets_lite",
            ModelFamily::PointNetLite => "pointnet_lite",
            ModelFamily::HierLite => "hier_lite",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model family {name:?}")))
    }
}

/// Pooling used to aggregate per-point features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    Sum,
    Max,
}

/// Architecture descriptor: per-point network widths, classifier widths,
/// dropout rate, and (for `hier_lite`) the sampling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArch {
    pub family: ModelFamily,
    /// Widths of the per-point network, input width (3) included.
    pub phi_widths: Vec<usize>,
    /// Widths of the classifier, from pooled-feature width down to `C`.
    pub rho_widths: Vec<usize>,
    /// Dropout rate applied to `rho` hidden layers during training.
    pub dropout_rate: f64,
    /// Number of FPS centroids (`hier_lite` only; 0 otherwise).
    pub n_centroids: usize,
    /// Group size for k-NN grouping (`hier_lite` only; 0 otherwise).
    pub group_k: usize,
}

impl ModelArch {
    /// The default desk-scale architecture for a family.
    pub fn preset(family: ModelFamily, n_classes: usize) -> ModelArch {
        let (n_centroids, group_k) = match family {
            ModelFamily::HierLite => (32, 16),
            _ => (0, 0),
        };
        ModelArch {
            family,
            phi_widths: vec![3, 32, 64],
            rho_widths: vec![64, 32, n_classes],
            dropout_rate: 0.3,
            n_centroids,
            group_k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi_widths.first() != Some(&3) {
            return Err(Error::InvalidArgument(
                "per-point network must take 3D inputs".into(),
            ));
        }
        if self.phi_widths.len() < 2 || self.rho_widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "phi and rho both need at least one layer".into(),
            ));
        }
        if self.rho_widths.first() != self.phi_widths.last() {
            return Err(Error::InvalidArgument(format!(
                "classifier input width {:?} must match pooled feature width {:?}",
                self.rho_widths.first(),
                self.phi_widths.last()
            )));
        }
        if self.n_classes() < 2 {
            return Err(Error::InvalidArgument(
                "classifier must output at least 2 classes".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {}",
                self.dropout_rate
            )));
        }
        if self.family == ModelFamily::HierLite && (self.n_centroids == 0 || self.group_k == 0) {
            return Err(Error::InvalidArgument(
                "hier_lite needs n_centroids and group_k".into(),
            ));
        }
        Ok(())
    }

    /// Sum pooling for `deepsets_lite`, max pooling otherwise.
    pub fn pooling(&self) -> Pooling {
        match self.family {
            ModelFamily::DeepSetsLite => Pooling::Sum,
            _ => Pooling::Max,
        }
    }

    pub fn n_classes(&self) -> usize {
        *self.rho_widths.last().unwrap()
    }

    /// Width of the pooled global signature.
    pub fn feature_dim(&self) -> usize {
        *self.phi_widths.last().unwrap()
    }

    pub fn phi_layout(&self) -> MlpLayout {
        MlpLayout::new(self.phi_widths.clone()).expect("validated widths")
    }

    pub fn rho_layout(&self) -> MlpLayout {
        MlpLayout::new(self.rho_widths.clone()).expect("validated widths")
    }

    /// Length of the encoder (phi) slice of the flat parameter vector.
    pub fn encoder_param_len(&self) -> usize {
        self.phi_layout().param_len()
    }

    pub fn param_len(&self) -> usize {
        self.phi_layout().param_len() + self.rho_layout().param_len()
    }

    /// He-uniform initialization; draws phi parameters first, then rho.
    pub fn init_params(&self, rng: &mut Rng) -> Vec<f64> {
        let mut params = self.phi_layout().init_params(rng);
        params.extend(self.rho_layout().init_params(rng));
        params
    }
}

/// The three independently settable seed factors of one training run.
///
/// `data_order` drives epoch shuffling and augmentation, `init` drives weight
/// initialization, `dropout` drives dropout masks. Holding a factor constant
/// across instances removes that source of diversity; holding all three
/// constant makes instances bit-identical (training here is deterministic, so
/// there is no residual nondeterminism to observe).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedBundle {
    pub data_order: u64,
    pub init: u64,
    pub dropout: u64,
}

impl SeedBundle {
    pub fn new(data_order: u64, init: u64, dropout: u64) -> Self {
        SeedBundle {
            data_order,
            init,
            dropout,
        }
    }
}

/// Per-factor seed roots; instance `i` uses `root + i` for each varied factor.
#[derive(Debug, Clone, Copy)]
pub struct SeedRoots {
    pub data_order: u64,
    pub init: u64,
    pub dropout: u64,
}

impl SeedRoots {
    /// Derives the three factor roots from one master seed.
    pub fn from_master(master: u64) -> SeedRoots {
        use crate::numerics::derive_seed;
        SeedRoots {
            data_order: derive_seed(master, 1),
            init: derive_seed(master, 2),
            dropout: derive_seed(master, 3),
        }
    }

    pub fn bundle_for_instance(&self, i: u64) -> SeedBundle {
        SeedBundle {
            data_order: self.data_order.wrapping_add(i),
            init: self.init.wrapping_add(i),
            dropout: self.dropout.wrapping_add(i),
        }
    }
}

/// Epoch count and loss bookkeeping from a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub epochs: usize,
    /// Mean cross-entropy over the final epoch.
    pub final_loss: f64,
    /// Mean cross-entropy at initialization, before any update.
    pub initial_loss: f64,
}

/// Training hyper-parameters. The defaults are the settings every experiment
/// uses unless configured otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub momentum: f64,
    /// Multiplicative per-epoch learning-rate factor.
    pub lr_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    SgdMomentum,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 16,
            learning_rate: 0.01,
            optimizer: Optimizer::SgdMomentum,
            momentum: 0.9,
            lr_decay: 0.97,
        }
    }
}

/// An architecture plus the flat parameter vector that realizes it, and the
/// seeds that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub arch: ModelArch,
    pub params: Vec<f64>,
    pub seeds: SeedBundle,
    /// `None` for freshly initialized or deserialized models (the model file
    /// format stores parameters, not training history).
    pub train_record: Option<TrainRecord>,
}

impl TrainedModel {
    pub(crate) fn assemble(
        arch: ModelArch,
        params: Vec<f64>,
        seeds: SeedBundle,
        train_record: Option<TrainRecord>,
    ) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_len() {
            return Err(Error::ShapeMismatch(format!(
                "{} params vs layout length {}",
                params.len(),
                arch.param_len()
            )));
        }
        if let Some(x) = params.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("model parameter {x}")));
        }
        Ok(TrainedModel {
            arch,
            params,
            seeds,
            train_record,
        })
    }

    /// A freshly He-initialized, untrained model.
    pub fn initialized(arch: ModelArch, seeds: SeedBundle) -> Result<Self> {
        arch.validate()?;
        let mut rng = Rng::new(seeds.init);
        let params = arch.init_params(&mut rng);
        TrainedModel::assemble(arch, params, seeds, None)
    }

    pub fn encoder_params(&self) -> &[f64] {
        &self.params[..self.arch.encoder_param_len()]
    }

    pub fn classifier_params(&self) -> &[f64] {
        &self.params[self.arch.encoder_param_len()..]
    }
}

/// Exact number of parameters of the model.
pub fn param_count(model: &TrainedModel) -> usize {
    model.params.len()
}

/// Pooled global signature of a cloud: the vector fed to the classifier.
pub fn encode(model: &TrainedModel, pc: &PointCloud) -> Result<Vec<f64>> {
    Ok(net::encode_record(&model.arch, &model.params, pc)?.feature)
}

/// Raw class scores (pre-softmax); dropout is disabled at inference.
/// `predict` is exactly `rho` applied to [`encode`].
pub fn predict(model: &TrainedModel, pc: &PointCloud) -> Result<Vec<f64>> {
    let feature = encode(model, pc)?;
    let trace = mlp_forward(
        model.classifier_params(),
        &model.arch.rho_layout(),
        &feature,
        None,
    )?;
    Ok(trace.output().to_vec())
}

/// Scores every `eval_indices` sample; rows align with the index order and
/// carry the dataset labels and indices as sample ids.
pub fn predict_scores(
    model: &TrainedModel,
    dataset: &LabeledDataset,
    eval_indices: &[usize],
) -> Result<ScoreMatrix> {
    let c = model.arch.n_classes();
    if dataset.n_classes() != c {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} classes, model outputs {c}",
            dataset.n_classes()
        )));
    }
    let mut data = Vec::with_capacity(eval_indices.len() * c);
    let mut labels = Vec::with_capacity(eval_indices.len());
    let mut ids = Vec::with_capacity(eval_indices.len());
    for &i in eval_indices {
        if i >= dataset.len() {
            return Err(Error::InvalidArgument(format!(
                "eval index {i} out of range"
            )));
        }
        data.extend(predict(model, dataset.cloud(i))?);
        labels.push(dataset.label(i));
        ids.push(i as u64);
    }
    let tag = format!("{}#{}", model.arch.family.name(), model.seeds.init);
    ScoreMatrix::new(Mat::new(eval_indices.len(), c, data)?, labels, ids, tag)
}

/// Wall-clock statistics for repeated batch inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    /// Repetitions included in the statistics (the warm-up is excluded).
    pub repetitions: usize,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

/// Times `repetitions` batch predictions after one discarded warm-up pass.
pub fn time_inference(
    model: &TrainedModel,
    batch: &[PointCloud],
    repetitions: usize,
) -> Result<TimingReport> {
    if repetitions < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 repetitions, got {repetitions}"
        )));
    }
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let run = |model: &TrainedModel| -> Result<f64> {
        let start = std::time::Instant::now();
        for pc in batch {
            predict(model, pc)?;
        }
        Ok(start.elapsed().as_secs_f64())
    };
    run(model)?; // warm-up, discarded
    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        times.push(run(model)?);
    }
    let mean = times.iter().sum::<f64>() / repetitions as f64;
    Ok(TimingReport {
        repetitions,
        mean_s: mean,
        min_s: times.iter().copied().fold(f64::INFINITY, f64::min),
        max_s: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::generate_shape;
    use crate::pointcloud::ShapeKind;

    fn small_arch(family: ModelFamily) -> ModelArch {
        let (n_centroids, group_k) = match family {
            ModelFamily::HierLite => (4, 3),
            _ => (0, 0),
        };
        ModelArch {
            family,
            phi_widths: vec![3, 8, 12],
            rho_widths: vec![12, 8, 4],
            dropout_rate: 0.3,
            n_centroids,
            group_k,
        }
    }

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        generate_shape(ShapeKind::Torus, n, 0.05, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn param_count_matches_per_layer_arithmetic() {
        // Independent oracle: sum of in*out + out over all layers.
        let closed_form = |widths: &[usize]| -> usize {
            widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
        };
        let arch = ModelArch {
            family: ModelFamily::DeepSetsLite,
            phi_widths: vec![3, 32, 64],
            rho_widths: vec![64, 32, 8],
            dropout_rate: 0.3,
            n_centroids: 0,
            group_k: 0,
        };
        let expected = closed_form(&[3, 32, 64]) + closed_form(&[64, 32, 8]);
        assert_eq!(expected, 4584);
        assert_eq!(arch.param_len(), expected);
        let model =
            TrainedModel::initialized(arch, SeedBundle::new(0, 0, 0)).unwrap();
        assert_eq!(param_count(&model), expected);
    }

    #[test]
    fn single_linear_layer_count_is_in_out_plus_out() {
        let layout = MlpLayout::new(vec![7, 5]).unwrap();
        assert_eq!(layout.param_len(), 7 * 5 + 5);
    }

    #[test]
    fn zero_weight_model_scores_zero() {
        for family in ModelFamily::ALL {
            let arch = small_arch(family);
            let params = vec![0.0; arch.param_len()];
            let model =
                TrainedModel::assemble(arch, params, SeedBundle::new(0, 0, 0), None).unwrap();
            let scores = predict(&model, &random_cloud(16, 1)).unwrap();
            assert!(scores.iter().all(|&s| s == 0.0), "{family:?}");
        }
    }

    #[test]
    fn predict_is_rho_of_encode_bit_exactly() {
        for family in ModelFamily::ALL {
            let model =
                TrainedModel::initialized(small_arch(family), SeedBundle::new(1, 2, 3)).unwrap();
            let pc = random_cloud(20, 2);
            let feature = encode(&model, &pc).unwrap();
            let via_rho = mlp_forward(
                model.classifier_params(),
                &model.arch.rho_layout(),
                &feature,
                None,
            )
            .unwrap();
            assert_eq!(predict(&model, &pc).unwrap(), via_rho.output());
        }
    }

    #[test]
    fn max_pool_families_are_permutation_invariant_bit_exactly() {
        for family in [ModelFamily::PointNetLite, ModelFamily::HierLite] {
            let model =
                TrainedModel::initialized(small_arch(family), SeedBundle::new(4, 5, 6)).unwrap();
            let pc = random_cloud(24, 3);
            let mut perm: Vec<usize> = (0..pc.len()).collect();
            Rng::new(9).shuffle(&mut perm);
            let shuffled = pc.permuted(&perm).unwrap();
            assert_eq!(
                predict(&model, &pc).unwrap(),
                predict(&model, &shuffled).unwrap(),
                "{family:?}"
            );
        }
    }

    #[test]
    fn sum_pooling_is_permutation_invariant_up_to_roundoff() {
        let model = TrainedModel::initialized(
            small_arch(ModelFamily::DeepSetsLite),
            SeedBundle::new(4, 5, 6),
        )
        .unwrap();
        let pc = random_cloud(24, 3);
        let mut perm: Vec<usize> = (0..pc.len()).collect();
        Rng::new(10).shuffle(&mut perm);
        let shuffled = pc.permuted(&perm).unwrap();
        let a = predict(&model, &pc).unwrap();
        let b = predict(&model, &shuffled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let rel = (x - y).abs() / x.abs().max(y.abs()).max(1e-12);
            assert!(rel < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn duplicated_points_do_not_change_max_pool_scores() {
        let model = TrainedModel::initialized(
            small_arch(ModelFamily::PointNetLite),
            SeedBundle::new(7, 8, 9),
        )
        .unwrap();
        let pc = random_cloud(16, 4);
        let mut doubled = pc.points().to_vec();
        doubled.extend_from_slice(pc.points());
        let doubled = PointCloud::new(doubled).unwrap();
        assert_eq!(
            predict(&model, &pc).unwrap(),
            predict(&model, &doubled).unwrap()
        );
    }

    #[test]
    fn sum_pool_feature_is_additive_over_multiset_union() {
        let model = TrainedModel::initialized(
            small_arch(ModelFamily::DeepSetsLite),
            SeedBundle::new(10, 11, 12),
        )
        .unwrap();
        let a = random_cloud(10, 5);
        let b = random_cloud(14, 6);
        let mut both = a.points().to_vec();
        both.extend_from_slice(b.points());
        let both = PointCloud::new(both).unwrap();
        let fa = encode(&model, &a).unwrap();
        let fb = encode(&model, &b).unwrap();
        let fab = encode(&model, &both).unwrap();
        for ((x, y), z) in fa.iter().zip(&fb).zip(&fab) {
            let rel = (x + y - z).abs() / z.abs().max(1e-9);
            assert!(rel < 1e-9, "{} + {} vs {}", x, y, z);
        }
    }

    #[test]
    fn predict_scores_single_sample_matches_predict() {
        let spec = crate::pointcloud::GenSpec {
            kinds: vec![ShapeKind::Sphere, ShapeKind::Cube, ShapeKind::Torus, ShapeKind::Cone],
            train_per_class: 2,
            test_per_class: 1,
            n_points: 16,
            noise_sigma: 0.02,
            seed: 3,
        };
        let ds = crate::pointcloud::generate_dataset(&spec).unwrap();
        let model = TrainedModel::initialized(
            small_arch(ModelFamily::PointNetLite),
            SeedBundle::new(1, 1, 1),
        )
        .unwrap();
        let m = predict_scores(&model, &ds, &[2]).unwrap();
        assert_eq!(m.n_samples(), 1);
        assert_eq!(m.row(0), predict(&model, ds.cloud(2)).unwrap().as_slice());

        // Row-concatenation property: two disjoint index sets vs the union.
        let left = predict_scores(&model, &ds, &[0, 1]).unwrap();
        let right = predict_scores(&model, &ds, &[5, 6]).unwrap();
        let both = predict_scores(&model, &ds, &[0, 1, 5, 6]).unwrap();
        assert_eq!(both.row(0), left.row(0));
        assert_eq!(both.row(1), left.row(1));
        assert_eq!(both.row(2), right.row(0));
        assert_eq!(both.row(3), right.row(1));
    }

    #[test]
    fn timing_requires_three_repetitions_and_reports_them() {
        let model = TrainedModel::initialized(
            small_arch(ModelFamily::DeepSetsLite),
            SeedBundle::new(0, 0, 0),
        )
        .unwrap();
        let batch: Vec<PointCloud> = (0..4).map(|i| random_cloud(16, i)).collect();
        assert!(time_inference(&model, &batch, 2).is_err());
        let a = time_inference(&model, &batch, 3).unwrap();
        let b = time_inference(&model, &batch, 3).unwrap();
        assert_eq!(a.repetitions, 3);
        assert!(a.min_s <= a.mean_s && a.mean_s <= a.max_s);
        // Times differ run to run, but the model itself is unchanged.
        assert_eq!(param_count(&model), param_count(&model));
        let _ = b;
    }
}
