//! Toy frustum-style three-stage detector: per-point segmentation, centering,
//! and box estimation on synthetic scenes, with last-module and all-module
//! ensembling and rotated-box IoU scoring.

mod boxes;
mod nets;
mod scene;
mod train;

pub use boxes::{average_precision, iou, wrap_angle, Box3D, IouMode};
pub use nets::{
    apply_center, box_loss_and_grad, center, center_loss_and_grad, compose_box, estimate_box,
    heading_bin_center, heading_bin_of, mask_points, seg_loss_and_grad, segment, BoxHeads,
    BoxTargets, PipelineArch, PipelineInstance, StageNet, HEADING_BINS,
};
pub use scene::{
    generate_scene, generate_scene_set, read_scenes, write_scenes, FrustumScene,
    OBJECT_NOISE_SIGMA, SCENE_CLASSES,
};
pub use train::{train_pipeline, train_pipeline_set};

use crate::error::{Error, Result};

/// Single-instance prediction: segment, mask, center, estimate, then carry
/// the box back to the global frame.
pub fn run_single(instance: &PipelineInstance, scene: &FrustumScene) -> Result<Box3D> {
    let probs = segment(&instance.seg, &scene.cloud, scene.class_idx, instance.n_classes)?;
    let object = mask_points(&scene.cloud, &probs)?;
    let t = center(&instance.centerer, &object)?;
    let centered = apply_center(&object, t);
    let (boxed, _) = estimate_box(&instance.boxer, &centered)?;
    Ok(boxed.translated(t))
}

fn mean3(values: &[[f64; 3]]) -> [f64; 3] {
    let n = values.len() as f64;
    let mut acc = [0.0; 3];
    for v in values {
        for k in 0..3 {
            acc[k] += v[k];
        }
    }
    [acc[0] / n, acc[1] / n, acc[2] / n]
}

fn mean_heads(heads: &[BoxHeads]) -> BoxHeads {
    let n = heads.len() as f64;
    let mut out = BoxHeads {
        center_res: [0.0; 3],
        size_values: [0.0; 3],
        bin_scores: [0.0; HEADING_BINS],
        bin_residuals: [0.0; HEADING_BINS],
    };
    for h in heads {
        for k in 0..3 {
            out.center_res[k] += h.center_res[k];
            out.size_values[k] += h.size_values[k];
        }
        for b in 0..HEADING_BINS {
            out.bin_scores[b] += h.bin_scores[b];
            out.bin_residuals[b] += h.bin_residuals[b];
        }
    }
    for k in 0..3 {
        out.center_res[k] /= n;
        out.size_values[k] /= n;
    }
    for b in 0..HEADING_BINS {
        out.bin_scores[b] /= n;
        out.bin_residuals[b] /= n;
    }
    out
}

/// Last-module ensembling: segmentation and centering come from the first
/// (reference) instance; the box heads of all instances are averaged —
/// center residual and size in values, heading-bin scores pre-argmax,
/// residuals per bin.
pub fn ensemble_last(instances: &[PipelineInstance], scene: &FrustumScene) -> Result<Box3D> {
    if instances.is_empty() {
        return Err(Error::InvalidArgument("no instances".into()));
    }
    let reference = &instances[0];
    let probs = segment(&reference.seg, &scene.cloud, scene.class_idx, reference.n_classes)?;
    let object = mask_points(&scene.cloud, &probs)?;
    let t = center(&reference.centerer, &object)?;
    let centered = apply_center(&object, t);
    let heads: Vec<BoxHeads> = instances
        .iter()
        .map(|inst| estimate_box(&inst.boxer, &centered).map(|(_, h)| h))
        .collect::<Result<_>>()?;
    Ok(compose_box(&mean_heads(&heads))?.translated(t))
}

/// All-module ensembling: per-point probabilities are averaged across
/// instances before masking, centering translations are averaged on the
/// shared masked cloud, and box heads are averaged as in [`ensemble_last`].
pub fn ensemble_all(instances: &[PipelineInstance], scene: &FrustumScene) -> Result<Box3D> {
    if instances.is_empty() {
        return Err(Error::InvalidArgument("no instances".into()));
    }
    let n = instances.len() as f64;
    let mut mean_probs = vec![0.0f64; scene.cloud.len()];
    for inst in instances {
        let probs = segment(&inst.seg, &scene.cloud, scene.class_idx, inst.n_classes)?;
        for (acc, p) in mean_probs.iter_mut().zip(&probs) {
            *acc += p / n;
        }
    }
    let object = mask_points(&scene.cloud, &mean_probs)?;
    let translations: Vec<[f64; 3]> = instances
        .iter()
        .map(|inst| center(&inst.centerer, &object))
        .collect::<Result<_>>()?;
    let t = mean3(&translations);
    let centered = apply_center(&object, t);
    let heads: Vec<BoxHeads> = instances
        .iter()
        .map(|inst| estimate_box(&inst.boxer, &centered).map(|(_, h)| h))
        .collect::<Result<_>>()?;
    Ok(compose_box(&mean_heads(&heads))?.translated(t))
}
