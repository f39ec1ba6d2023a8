//! Sequential training of the three pipeline stages.
//!
//! Stages are trained in pipeline order with teacher forcing: segmentation on
//! ground-truth masks, centering on ground-truth-masked points toward the
//! true box center, and box estimation on clouds centered by the
//! already-trained centering network. Everything is seeded; the three stages
//! draw from separate derived streams of the instance's seed bundle, so an
//! instance is a pure function of (scenes, architecture, seeds, config).
//! Stage networks use no dropout; the bundle's dropout seed is unused here.

use super::nets::{
    box_loss_and_grad, center, center_loss_and_grad, mask_points, seg_loss_and_grad, BoxTargets,
    PipelineArch, PipelineInstance, StageNet,
};
use super::scene::FrustumScene;
use crate::error::{Error, Result};
use crate::models::{SeedBundle, TrainConfig};
use crate::numerics::{derive_seed, Rng};
use crate::pointcloud::PointCloud;

fn gt_object(scene: &FrustumScene) -> Result<PointCloud> {
    let probs: Vec<f64> = scene
        .gt_mask
        .iter()
        .map(|&m| if m { 1.0 } else { 0.0 })
        .collect();
    mask_points(&scene.cloud, &probs)
}

/// Gradient-norm ceiling for the stage trainers. The regression stages see
/// raw (unnormalized) coordinates, so early squared-error gradients can be
/// large; clipping keeps momentum SGD from diverging.
const STAGE_GRAD_CLIP: f64 = 10.0;

/// One SGD-with-momentum loop over scene indices.
fn stage_sgd<F>(
    net: &mut StageNet,
    n_scenes: usize,
    cfg: &TrainConfig,
    data_rng: &mut Rng,
    mut loss_grad: F,
) -> Result<()>
where
    F: FnMut(usize, &StageNet) -> Result<(f64, Vec<f64>)>,
{
    let mut velocity = vec![0.0f64; net.param_len()];
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.lr_decay.powi(epoch as i32);
        let mut order: Vec<usize> = (0..n_scenes).collect();
        data_rng.shuffle(&mut order);
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grad_accum = vec![0.0f64; net.param_len()];
            let mut batch_loss = 0.0;
            for &i in batch {
                let (loss, grad) = loss_grad(i, net)?;
                batch_loss += loss;
                for (acc, g) in grad_accum.iter_mut().zip(&grad) {
                    *acc += g;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                    detail: format!("stage batch loss {batch_loss}"),
                });
            }
            let mut scale = 1.0 / batch.len() as f64;
            let norm = grad_accum
                .iter()
                .map(|g| g * scale * g * scale)
                .sum::<f64>()
                .sqrt();
            if norm > STAGE_GRAD_CLIP {
                scale *= STAGE_GRAD_CLIP / norm;
            }
            for ((p, v), g) in net.params.iter_mut().zip(&mut velocity).zip(&grad_accum) {
                *v = cfg.momentum * *v - lr * g * scale;
                *p += *v;
            }
        }
    }
    Ok(())
}

/// Trains one pipeline instance on the given scenes.
pub fn train_pipeline(
    scenes: &[FrustumScene],
    arch: &PipelineArch,
    seeds: SeedBundle,
    cfg: &TrainConfig,
) -> Result<PipelineInstance> {
    if scenes.is_empty() {
        return Err(Error::InvalidArgument("no training scenes".into()));
    }
    if cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    let phi = arch.phi_layout()?;

    // Segmentation.
    let mut seg = StageNet::initialized(
        phi.clone(),
        arch.seg_head_layout()?,
        &mut Rng::new(derive_seed(seeds.init, 10)),
    );
    let mut seg_rng = Rng::new(derive_seed(seeds.data_order, 10));
    stage_sgd(&mut seg, scenes.len(), cfg, &mut seg_rng, |i, net| {
        seg_loss_and_grad(net, &scenes[i], arch.n_classes)
    })?;

    // Centering, trained on ground-truth-masked objects.
    let objects: Vec<PointCloud> = scenes.iter().map(gt_object).collect::<Result<_>>()?;
    let mut centerer = StageNet::initialized(
        phi.clone(),
        arch.center_head_layout()?,
        &mut Rng::new(derive_seed(seeds.init, 11)),
    );
    let mut center_rng = Rng::new(derive_seed(seeds.data_order, 11));
    stage_sgd(&mut centerer, scenes.len(), cfg, &mut center_rng, |i, net| {
        center_loss_and_grad(net, &objects[i], scenes[i].gt_box.center())
    })?;

    // Box estimation, on clouds centered by the trained centering network.
    let centered_inputs: Vec<(PointCloud, BoxTargets)> = scenes
        .iter()
        .zip(&objects)
        .map(|(scene, object)| {
            let t = center(&centerer, object)?;
            let targets = BoxTargets::from_box(&scene.gt_box, t);
            Ok((super::nets::apply_center(object, t), targets))
        })
        .collect::<Result<_>>()?;
    let mut boxer = StageNet::initialized(
        phi,
        arch.box_head_layout()?,
        &mut Rng::new(derive_seed(seeds.init, 12)),
    );
    let mut box_rng = Rng::new(derive_seed(seeds.data_order, 12));
    stage_sgd(&mut boxer, scenes.len(), cfg, &mut box_rng, |i, net| {
        let (cloud, targets) = &centered_inputs[i];
        box_loss_and_grad(net, cloud, targets)
    })?;

    Ok(PipelineInstance {
        seg,
        centerer,
        boxer,
        n_classes: arch.n_classes,
    })
}

/// Trains `n` independent instances in parallel; instance `i` uses seed roots
/// offset by `i`.
pub fn train_pipeline_set(
    scenes: &[FrustumScene],
    arch: &PipelineArch,
    n_instances: usize,
    seed_root: u64,
    cfg: &TrainConfig,
) -> Result<Vec<PipelineInstance>> {
    use rayon::prelude::*;
    if n_instances == 0 {
        return Err(Error::InvalidArgument("n_instances = 0".into()));
    }
    (0..n_instances)
        .into_par_iter()
        .map(|i| {
            let seeds = SeedBundle {
                data_order: derive_seed(seed_root, 100 + i as u64),
                init: derive_seed(seed_root, 200 + i as u64),
                dropout: derive_seed(seed_root, 300 + i as u64),
            };
            train_pipeline(scenes, arch, seeds, cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::scene::generate_scene_set;

    #[test]
    fn pipeline_training_is_deterministic() {
        let scenes = generate_scene_set(6, 16, 8, 3).unwrap();
        let arch = PipelineArch {
            phi_widths: vec![3, 6, 8],
            head_hidden: 6,
            n_classes: 3,
        };
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 3,
            ..TrainConfig::default()
        };
        let seeds = SeedBundle::new(1, 2, 3);
        let a = train_pipeline(&scenes, &arch, seeds, &cfg).unwrap();
        let b = train_pipeline(&scenes, &arch, seeds, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trained_segmentation_beats_chance_on_held_out_scenes() {
        let train_scenes = generate_scene_set(24, 48, 32, 5).unwrap();
        let test_scenes = generate_scene_set(6, 48, 32, 99).unwrap();
        let arch = PipelineArch {
            phi_widths: vec![3, 16, 32],
            head_hidden: 16,
            n_classes: 3,
        };
        let cfg = TrainConfig {
            epochs: 12,
            batch_size: 4,
            learning_rate: 0.02,
            ..TrainConfig::default()
        };
        let inst = train_pipeline(&train_scenes, &arch, SeedBundle::new(7, 8, 9), &cfg).unwrap();
        let mut iou_sum = 0.0;
        for scene in &test_scenes {
            let probs =
                super::super::nets::segment(&inst.seg, &scene.cloud, scene.class_idx, 3).unwrap();
            let mut inter = 0usize;
            let mut union = 0usize;
            for (&p, &gt) in probs.iter().zip(&scene.gt_mask) {
                let pred = p >= 0.5;
                if pred && gt {
                    inter += 1;
                }
                if pred || gt {
                    union += 1;
                }
            }
            iou_sum += inter as f64 / union.max(1) as f64;
        }
        let mean_iou = iou_sum / test_scenes.len() as f64;
        assert!(mean_iou > 0.7, "mean mask IoU {mean_iou}");
    }
}
