//! Forward and backward passes shared by the three classifier families.
//!
//! One code path serves both inference and training: the forward pass always
//! produces an [`EncodeRecord`] carrying the pooling bookkeeping (traces and
//! argmax indices) that the backward pass replays. Selection steps (FPS
//! centroids, k-NN groups, max-pool argmaxes) are treated as constants of the
//! backward pass, the usual subgradient choice.

use super::{ModelArch, ModelFamily, Pooling};
use crate::error::Result;
use crate::numerics::{
    backward_from_trace, mlp_forward, softmax, DropoutMask, MlpTrace,
};
use crate::pointcloud::{farthest_point_sampling, knn_group, PointCloud};

/// Everything the backward pass needs from an encoder forward pass.
pub(crate) struct EncodeRecord {
    pub feature: Vec<f64>,
    variant: Variant,
}

enum Variant {
    Flat {
        traces: Vec<MlpTrace>,
        /// Per feature, the point holding the max (max pooling only).
        argmax: Option<Vec<usize>>,
    },
    Hier {
        /// Per group, per member: the local trace on relative coordinates.
        member_traces: Vec<Vec<MlpTrace>>,
        /// Per group, per feature: which member holds the group max.
        group_argmax: Vec<Vec<usize>>,
        /// Per feature: which group holds the global max.
        global_argmax: Vec<usize>,
    },
}

/// Max pool over rows; returns the pooled vector and per-feature argmax
/// (lowest index wins ties).
fn max_pool(rows: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<usize>) {
    let mut pooled = vec![f64::NEG_INFINITY; dim];
    let mut holders = vec![0usize; dim];
    for (r, row) in rows.iter().enumerate() {
        for j in 0..dim {
            if row[j] > pooled[j] {
                pooled[j] = row[j];
                holders[j] = r;
            }
        }
    }
    (pooled, holders)
}

/// Lexicographic (x, y, z) order of the cloud's points. Putting the cloud in
/// canonical order before sampling makes the hierarchical path independent of
/// input point order.
fn canonical_order(pc: &PointCloud) -> PointCloud {
    let mut points = pc.points().to_vec();
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    PointCloud::new(points).expect("nonempty by invariant")
}

pub(crate) fn encode_record(
    arch: &ModelArch,
    params: &[f64],
    pc: &PointCloud,
) -> Result<EncodeRecord> {
    let phi_layout = arch.phi_layout();
    let phi_params = &params[..arch.encoder_param_len()];
    let dim = arch.feature_dim();
    match arch.family {
        ModelFamily::DeepSetsLite | ModelFamily::PointNetLite => {
            let traces: Vec<MlpTrace> = pc
                .points()
                .iter()
                .map(|p| mlp_forward(phi_params, &phi_layout, p, None))
                .collect::<Result<_>>()?;
            match arch.pooling() {
                Pooling::Sum => {
                    let mut feature = vec![0.0; dim];
                    for t in &traces {
                        for (f, x) in feature.iter_mut().zip(t.output()) {
                            *f += x;
                        }
                    }
                    Ok(EncodeRecord {
                        feature,
                        variant: Variant::Flat {
                            traces,
                            argmax: None,
                        },
                    })
                }
                Pooling::Max => {
                    let rows: Vec<&[f64]> = traces.iter().map(|t| t.output()).collect();
                    let (feature, holders) = max_pool(&rows, dim);
                    Ok(EncodeRecord {
                        feature,
                        variant: Variant::Flat {
                            traces,
                            argmax: Some(holders),
                        },
                    })
                }
            }
        }
        ModelFamily::HierLite => {
            let canonical = canonical_order(pc);
            let n = canonical.len();
            let m = arch.n_centroids.min(n);
            let k = arch.group_k.min(n);
            let centroids = farthest_point_sampling(&canonical, m, 0)?;
            let groups = knn_group(&canonical, &centroids, k)?;
            let points = canonical.points();
            let mut member_traces = Vec::with_capacity(groups.len());
            let mut group_argmax = Vec::with_capacity(groups.len());
            let mut group_features: Vec<Vec<f64>> = Vec::with_capacity(groups.len());
            for (g, group) in groups.iter().enumerate() {
                let center = points[centroids[g]];
                let traces: Vec<MlpTrace> = group
                    .iter()
                    .map(|&i| {
                        let rel = [
                            points[i][0] - center[0],
                            points[i][1] - center[1],
                            points[i][2] - center[2],
                        ];
                        mlp_forward(phi_params, &phi_layout, &rel, None)
                    })
                    .collect::<Result<_>>()?;
                let rows: Vec<&[f64]> = traces.iter().map(|t| t.output()).collect();
                let (pooled, holders) = max_pool(&rows, dim);
                member_traces.push(traces);
                group_argmax.push(holders);
                group_features.push(pooled);
            }
            let rows: Vec<&[f64]> = group_features.iter().map(|f| f.as_slice()).collect();
            let (feature, global_argmax) = max_pool(&rows, dim);
            Ok(EncodeRecord {
                feature,
                variant: Variant::Hier {
                    member_traces,
                    group_argmax,
                    global_argmax,
                },
            })
        }
    }
}

/// Backpropagates `d_feature` through the pooling and the per-point network,
/// accumulating into the encoder slice of `grad` (same layout as `params`).
pub(crate) fn encoder_backward(
    arch: &ModelArch,
    params: &[f64],
    record: &EncodeRecord,
    d_feature: &[f64],
    grad_encoder: &mut [f64],
) -> Result<()> {
    let phi_layout = arch.phi_layout();
    let phi_params = &params[..arch.encoder_param_len()];
    let dim = arch.feature_dim();
    match &record.variant {
        Variant::Flat { traces, argmax } => match argmax {
            None => {
                // Sum pooling: every point receives the full upstream.
                for trace in traces {
                    let g = backward_from_trace(phi_params, &phi_layout, trace, d_feature, None)?;
                    for (acc, x) in grad_encoder.iter_mut().zip(&g.params) {
                        *acc += x;
                    }
                }
            }
            Some(holders) => {
                // Max pooling: feature j flows only to its holding point.
                let mut upstreams: Vec<Vec<f64>> = vec![vec![0.0; dim]; traces.len()];
                for j in 0..dim {
                    upstreams[holders[j]][j] += d_feature[j];
                }
                for (trace, upstream) in traces.iter().zip(&upstreams) {
                    if upstream.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let g = backward_from_trace(phi_params, &phi_layout, trace, upstream, None)?;
                    for (acc, x) in grad_encoder.iter_mut().zip(&g.params) {
                        *acc += x;
                    }
                }
            }
        },
        Variant::Hier {
            member_traces,
            group_argmax,
            global_argmax,
        } => {
            // Global max pool first, then each group's local max pool.
            let mut group_upstreams: Vec<Vec<f64>> = vec![vec![0.0; dim]; member_traces.len()];
            for j in 0..dim {
                group_upstreams[global_argmax[j]][j] += d_feature[j];
            }
            for (g, traces) in member_traces.iter().enumerate() {
                if group_upstreams[g].iter().all(|&x| x == 0.0) {
                    continue;
                }
                let mut member_upstreams: Vec<Vec<f64>> = vec![vec![0.0; dim]; traces.len()];
                for j in 0..dim {
                    member_upstreams[group_argmax[g][j]][j] += group_upstreams[g][j];
                }
                for (trace, upstream) in traces.iter().zip(&member_upstreams) {
                    if upstream.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let grad =
                        backward_from_trace(phi_params, &phi_layout, trace, upstream, None)?;
                    for (acc, x) in grad_encoder.iter_mut().zip(&grad.params) {
                        *acc += x;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Stable softmax cross-entropy: loss and gradient with respect to the raw
/// scores.
pub(crate) fn cross_entropy(scores: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    let loss = log_sum - (scores[label] - max);
    let mut grad = softmax(scores)?;
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Full-model loss and parameter gradient for one (cloud, label) sample.
/// Exposed for gradient verification.
pub fn sample_loss_and_grad(
    arch: &ModelArch,
    params: &[f64],
    pc: &PointCloud,
    label: usize,
    mask: Option<&DropoutMask>,
) -> Result<(f64, Vec<f64>)> {
    let record = encode_record(arch, params, pc)?;
    let rho_layout = arch.rho_layout();
    let rho_params = &params[arch.encoder_param_len()..];
    let rho_trace = mlp_forward(rho_params, &rho_layout, &record.feature, mask)?;
    let (loss, d_scores) = cross_entropy(rho_trace.output(), label)?;
    let rho_grad = backward_from_trace(rho_params, &rho_layout, &rho_trace, &d_scores, mask)?;
    let mut grad = vec![0.0; params.len()];
    let split = arch.encoder_param_len();
    grad[split..].copy_from_slice(&rho_grad.params);
    encoder_backward(arch, params, &record, &rho_grad.input, &mut grad[..split])?;
    Ok((loss, grad))
}

/// Loss and classifier-only gradient, with the encoder held fixed.
pub(crate) fn head_loss_and_grad(
    arch: &ModelArch,
    params: &[f64],
    pc: &PointCloud,
    label: usize,
    mask: Option<&DropoutMask>,
) -> Result<(f64, Vec<f64>)> {
    let record = encode_record(arch, params, pc)?;
    let rho_layout = arch.rho_layout();
    let rho_params = &params[arch.encoder_param_len()..];
    let rho_trace = mlp_forward(rho_params, &rho_layout, &record.feature, mask)?;
    let (loss, d_scores) = cross_entropy(rho_trace.output(), label)?;
    let rho_grad = backward_from_trace(rho_params, &rho_layout, &rho_trace, &d_scores, mask)?;
    Ok((loss, rho_grad.params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{SeedBundle, TrainedModel};
    use crate::numerics::{finite_diff_check, Rng};
    use crate::pointcloud::{generate_shape, ShapeKind};

    #[test]
    fn cross_entropy_gradient_sums_to_zero() {
        let (loss, grad) = cross_entropy(&[0.5, -1.0, 2.0], 2).unwrap();
        assert!(loss > 0.0);
        assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        assert!(grad[2] < 0.0);
    }

    #[test]
    fn full_model_gradients_match_finite_differences() {
        for (family, seed) in [
            (ModelFamily::DeepSetsLite, 21u64),
            (ModelFamily::PointNetLite, 22),
            (ModelFamily::HierLite, 23),
        ] {
            let (n_centroids, group_k) = match family {
                ModelFamily::HierLite => (4, 3),
                _ => (0, 0),
            };
            let arch = ModelArch {
                family,
                phi_widths: vec![3, 5, 6],
                rho_widths: vec![6, 5, 3],
                dropout_rate: 0.0,
                n_centroids,
                group_k,
            };
            let model = TrainedModel::initialized(
                arch.clone(),
                SeedBundle::new(seed, seed, seed),
            )
            .unwrap();
            let pc = generate_shape(ShapeKind::Helix, 12, 0.05, &mut Rng::new(seed)).unwrap();
            let (_, grad) = sample_loss_and_grad(&arch, &model.params, &pc, 1, None).unwrap();
            let err = finite_diff_check(
                |p| sample_loss_and_grad(&arch, p, &pc, 1, None).map(|(l, _)| l),
                &model.params,
                &grad,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "{family:?}: {err}");
        }
    }
}
