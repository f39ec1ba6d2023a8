//! The three stage networks: instance segmentation, centering, and box
//! estimation. Each stage is a shared per-point MLP, a global max pool, and a
//! head; the segmentation head additionally runs per point on the
//! concatenation of point feature, global feature, and class one-hot.

use super::boxes::{wrap_angle, Box3D};
use super::scene::FrustumScene;
use crate::error::{Error, Result};
use crate::numerics::{
    argmax, backward_from_trace, mlp_forward, softmax, MlpLayout, MlpTrace, Rng,
};
use crate::pointcloud::PointCloud;

use std::f64::consts::PI;

/// Number of discrete heading bins.
pub const HEADING_BINS: usize = 4;

/// Center angle of a heading bin; the bins partition `[-pi, pi)` into
/// `HEADING_BINS` equal arcs.
pub fn heading_bin_center(bin: usize) -> f64 {
    let width = 2.0 * PI / HEADING_BINS as f64;
    -PI + (bin as f64 + 0.5) * width
}

/// Bin containing a (wrapped) heading angle.
pub fn heading_bin_of(theta: f64) -> usize {
    let width = 2.0 * PI / HEADING_BINS as f64;
    let idx = ((wrap_angle(theta) + PI) / width).floor() as usize;
    idx.min(HEADING_BINS - 1)
}

/// One stage network: a per-point MLP (`phi`) and a head MLP on the pooled
/// feature. Parameters are flat, phi first.
#[derive(Debug, Clone, PartialEq)]
pub struct StageNet {
    pub phi: MlpLayout,
    pub head: MlpLayout,
    pub params: Vec<f64>,
}

impl StageNet {
    pub fn zeroed(phi: MlpLayout, head: MlpLayout) -> StageNet {
        let len = phi.param_len() + head.param_len();
        StageNet {
            phi,
            head,
            params: vec![0.0; len],
        }
    }

    pub fn initialized(phi: MlpLayout, head: MlpLayout, rng: &mut Rng) -> StageNet {
        let mut params = phi.init_params(rng);
        params.extend(head.init_params(rng));
        StageNet { phi, head, params }
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<StageNet> {
        if params.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} params vs {}",
                params.len(),
                self.params.len()
            )));
        }
        Ok(StageNet {
            phi: self.phi.clone(),
            head: self.head.clone(),
            params,
        })
    }

    pub fn param_len(&self) -> usize {
        self.params.len()
    }

    fn phi_params(&self) -> &[f64] {
        &self.params[..self.phi.param_len()]
    }

    fn head_params(&self) -> &[f64] {
        &self.params[self.phi.param_len()..]
    }

    fn feature_dim(&self) -> usize {
        self.phi.out_dim()
    }
}

/// Architecture of one pipeline instance's stage networks.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineArch {
    pub phi_widths: Vec<usize>,
    pub head_hidden: usize,
    pub n_classes: usize,
}

impl PipelineArch {
    pub fn preset(n_classes: usize) -> PipelineArch {
        PipelineArch {
            phi_widths: vec![3, 32, 64],
            head_hidden: 32,
            n_classes,
        }
    }

    pub fn phi_layout(&self) -> Result<MlpLayout> {
        MlpLayout::new(self.phi_widths.clone())
    }

    fn feature_dim(&self) -> usize {
        *self.phi_widths.last().unwrap()
    }

    pub fn seg_head_layout(&self) -> Result<MlpLayout> {
        let f = self.feature_dim();
        MlpLayout::new(vec![2 * f + self.n_classes, self.head_hidden, 1])
    }

    pub fn center_head_layout(&self) -> Result<MlpLayout> {
        MlpLayout::new(vec![self.feature_dim(), self.head_hidden, 3])
    }

    pub fn box_head_layout(&self) -> Result<MlpLayout> {
        MlpLayout::new(vec![
            self.feature_dim(),
            self.head_hidden,
            3 + 3 + 2 * HEADING_BINS,
        ])
    }
}

/// Trained (or initialized) parameters of all three stages.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineInstance {
    pub seg: StageNet,
    pub centerer: StageNet,
    pub boxer: StageNet,
    pub n_classes: usize,
}

impl PipelineInstance {
    /// Freshly initialized stage networks from one seed.
    pub fn initialized(arch: &PipelineArch, seed: u64) -> Result<PipelineInstance> {
        let mut rng = Rng::new(seed);
        let phi = arch.phi_layout()?;
        let seg = StageNet::initialized(phi.clone(), arch.seg_head_layout()?, &mut rng);
        let centerer = StageNet::initialized(phi.clone(), arch.center_head_layout()?, &mut rng);
        let boxer = StageNet::initialized(phi, arch.box_head_layout()?, &mut rng);
        Ok(PipelineInstance {
            seg,
            centerer,
            boxer,
            n_classes: arch.n_classes,
        })
    }
}

fn max_pool_rows(rows: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<usize>) {
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

// ---------------------------------------------------------------------------
// Segmentation stage
// ---------------------------------------------------------------------------

struct SegRecord {
    traces: Vec<MlpTrace>,
    holders: Vec<usize>,
    head_traces: Vec<MlpTrace>,
    logits: Vec<f64>,
}

fn seg_forward(
    net: &StageNet,
    cloud: &PointCloud,
    class_idx: usize,
    n_classes: usize,
) -> Result<SegRecord> {
    if class_idx >= n_classes {
        return Err(Error::InvalidArgument(format!(
            "class index {class_idx} out of range for {n_classes}"
        )));
    }
    let dim = net.feature_dim();
    // Centering the scene on its centroid is pure geometry and keeps the
    // per-point shared weights equivariant.
    let centroid = cloud.centroid();
    let traces: Vec<MlpTrace> = cloud
        .points()
        .iter()
        .map(|p| {
            let rel = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
            mlp_forward(net.phi_params(), &net.phi, &rel, None)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<&[f64]> = traces.iter().map(|t| t.output()).collect();
    let (global, holders) = max_pool_rows(&rows, dim);
    let mut onehot = vec![0.0; n_classes];
    onehot[class_idx] = 1.0;
    let mut head_traces = Vec::with_capacity(traces.len());
    let mut logits = Vec::with_capacity(traces.len());
    for trace in &traces {
        let mut input = Vec::with_capacity(2 * dim + n_classes);
        input.extend_from_slice(trace.output());
        input.extend_from_slice(&global);
        input.extend_from_slice(&onehot);
        let head_trace = mlp_forward(net.head_params(), &net.head, &input, None)?;
        logits.push(head_trace.output()[0]);
        head_traces.push(head_trace);
    }
    Ok(SegRecord {
        traces,
        holders,
        head_traces,
        logits,
    })
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-point object probabilities `P` in `(0, 1)`; the object class is fed to
/// the head as a one-hot alongside the pooled global feature. Permutation
/// equivariant: permuting the input permutes `P` identically.
pub fn segment(
    net: &StageNet,
    cloud: &PointCloud,
    class_idx: usize,
    n_classes: usize,
) -> Result<Vec<f64>> {
    let record = seg_forward(net, cloud, class_idx, n_classes)?;
    Ok(record.logits.iter().map(|&z| sigmoid(z)).collect())
}

/// Mean binary cross-entropy of the segmentation against the ground-truth
/// mask, with the full parameter gradient.
pub fn seg_loss_and_grad(
    net: &StageNet,
    scene: &FrustumScene,
    n_classes: usize,
) -> Result<(f64, Vec<f64>)> {
    let record = seg_forward(net, &scene.cloud, scene.class_idx, n_classes)?;
    let n = record.logits.len() as f64;
    let dim = net.feature_dim();
    let mut loss = 0.0;
    let mut grad = vec![0.0; net.param_len()];
    let phi_len = net.phi.param_len();
    let (phi_grad, head_grad) = grad.split_at_mut(phi_len);
    let mut d_feats: Vec<Vec<f64>> = vec![vec![0.0; dim]; record.traces.len()];
    let mut d_global = vec![0.0; dim];
    for (i, (&z, &y)) in record.logits.iter().zip(&scene.gt_mask).enumerate() {
        let y = if y { 1.0 } else { 0.0 };
        // Stable BCE from logits.
        loss += z.max(0.0) - z * y + (1.0 + (-z.abs()).exp()).ln();
        let d_logit = (sigmoid(z) - y) / n;
        let g = backward_from_trace(
            net.head_params(),
            &net.head,
            &record.head_traces[i],
            &[d_logit],
            None,
        )?;
        for (acc, x) in head_grad.iter_mut().zip(&g.params) {
            *acc += x;
        }
        for j in 0..dim {
            d_feats[i][j] += g.input[j];
            d_global[j] += g.input[dim + j];
        }
    }
    loss /= n;
    // The pooled feature flows back to its per-feature holders.
    for j in 0..dim {
        d_feats[record.holders[j]][j] += d_global[j];
    }
    for (trace, d_feat) in record.traces.iter().zip(&d_feats) {
        if d_feat.iter().all(|&x| x == 0.0) {
            continue;
        }
        let g = backward_from_trace(net.phi_params(), &net.phi, trace, d_feat, None)?;
        for (acc, x) in phi_grad.iter_mut().zip(&g.params) {
            *acc += x;
        }
    }
    Ok((loss, grad))
}

/// Threshold masking: points with `P >= 0.5` are kept; if none pass, the
/// single highest-probability point (lowest index on ties) is returned.
pub fn mask_points(cloud: &PointCloud, probs: &[f64]) -> Result<PointCloud> {
    if probs.len() != cloud.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities vs {} points",
            probs.len(),
            cloud.len()
        )));
    }
    let kept: Vec<[f64; 3]> = cloud
        .points()
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p >= 0.5)
        .map(|(pt, _)| *pt)
        .collect();
    if kept.is_empty() {
        let best = argmax(probs);
        return PointCloud::new(vec![cloud.points()[best]]);
    }
    PointCloud::new(kept)
}

// ---------------------------------------------------------------------------
// Global-feature regression stages (centering and box estimation)
// ---------------------------------------------------------------------------

struct GlobalRecord {
    traces: Vec<MlpTrace>,
    holders: Vec<usize>,
    head_trace: MlpTrace,
}

impl GlobalRecord {
    fn output(&self) -> &[f64] {
        self.head_trace.output()
    }
}

fn global_forward(net: &StageNet, cloud: &PointCloud) -> Result<GlobalRecord> {
    let dim = net.feature_dim();
    let traces: Vec<MlpTrace> = cloud
        .points()
        .iter()
        .map(|p| mlp_forward(net.phi_params(), &net.phi, p, None))
        .collect::<Result<_>>()?;
    let rows: Vec<&[f64]> = traces.iter().map(|t| t.output()).collect();
    let (global, holders) = max_pool_rows(&rows, dim);
    let head_trace = mlp_forward(net.head_params(), &net.head, &global, None)?;
    Ok(GlobalRecord {
        traces,
        holders,
        head_trace,
    })
}

fn global_backward(net: &StageNet, record: &GlobalRecord, d_out: &[f64]) -> Result<Vec<f64>> {
    let dim = net.feature_dim();
    let mut grad = vec![0.0; net.param_len()];
    let phi_len = net.phi.param_len();
    let head_grad = backward_from_trace(
        net.head_params(),
        &net.head,
        &record.head_trace,
        d_out,
        None,
    )?;
    grad[phi_len..].copy_from_slice(&head_grad.params);
    let mut upstreams: Vec<Vec<f64>> = vec![vec![0.0; dim]; record.traces.len()];
    for j in 0..dim {
        upstreams[record.holders[j]][j] += head_grad.input[j];
    }
    for (trace, upstream) in record.traces.iter().zip(&upstreams) {
        if upstream.iter().all(|&x| x == 0.0) {
            continue;
        }
        let g = backward_from_trace(net.phi_params(), &net.phi, trace, upstream, None)?;
        for (acc, x) in grad[..phi_len].iter_mut().zip(&g.params) {
            *acc += x;
        }
    }
    Ok(grad)
}

/// Predicted centering translation for a masked object cloud. With all-zero
/// weights this is exactly the (zero-initialized) output bias.
pub fn center(net: &StageNet, object: &PointCloud) -> Result<[f64; 3]> {
    let record = global_forward(net, object)?;
    let out = record.output();
    Ok([out[0], out[1], out[2]])
}

/// Pure geometry: the cloud translated by `-t`.
pub fn apply_center(object: &PointCloud, t: [f64; 3]) -> PointCloud {
    PointCloud::new(
        object
            .points()
            .iter()
            .map(|p| [p[0] - t[0], p[1] - t[1], p[2] - t[2]])
            .collect(),
    )
    .expect("translation preserves cloud validity")
}

/// Squared-error centering loss `|T - target|^2` with parameter gradient.
pub fn center_loss_and_grad(
    net: &StageNet,
    object: &PointCloud,
    target: [f64; 3],
) -> Result<(f64, Vec<f64>)> {
    let record = global_forward(net, object)?;
    let out = record.output();
    let mut loss = 0.0;
    let mut d_out = vec![0.0; 3];
    for k in 0..3 {
        let r = out[k] - target[k];
        loss += r * r;
        d_out[k] = 2.0 * r;
    }
    let grad = global_backward(net, &record, &d_out)?;
    Ok((loss, grad))
}

/// Raw box-estimation heads: center residual and size in values, heading as
/// raw bin scores plus per-bin residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxHeads {
    pub center_res: [f64; 3],
    /// Positive extents (the raw head goes through `exp`).
    pub size_values: [f64; 3],
    pub bin_scores: [f64; HEADING_BINS],
    pub bin_residuals: [f64; HEADING_BINS],
}

impl BoxHeads {
    fn from_raw(out: &[f64]) -> BoxHeads {
        let mut heads = BoxHeads {
            center_res: [out[0], out[1], out[2]],
            size_values: [out[3].exp(), out[4].exp(), out[5].exp()],
            bin_scores: [0.0; HEADING_BINS],
            bin_residuals: [0.0; HEADING_BINS],
        };
        for b in 0..HEADING_BINS {
            heads.bin_scores[b] = out[6 + b];
            heads.bin_residuals[b] = out[6 + HEADING_BINS + b];
        }
        heads
    }
}

/// Assembles a centered-frame box from (possibly averaged) heads: heading is
/// the argmax bin's center plus that bin's residual.
pub fn compose_box(heads: &BoxHeads) -> Result<Box3D> {
    let bin = argmax(&heads.bin_scores);
    let heading = heading_bin_center(bin) + heads.bin_residuals[bin];
    Box3D::new(heads.center_res, heads.size_values, heading)
}

/// Box estimation in the centered frame; the caller translates the box back
/// to the global frame by `+T`.
pub fn estimate_box(net: &StageNet, centered: &PointCloud) -> Result<(Box3D, BoxHeads)> {
    let record = global_forward(net, centered)?;
    let heads = BoxHeads::from_raw(record.output());
    Ok((compose_box(&heads)?, heads))
}

/// Regression targets for the box stage, in the centered frame.
#[derive(Debug, Clone, Copy)]
pub struct BoxTargets {
    pub center: [f64; 3],
    /// Log of the ground-truth extents.
    pub size_log: [f64; 3],
    pub heading_bin: usize,
    pub heading_residual: f64,
}

impl BoxTargets {
    /// Targets for a ground-truth box seen from a frame translated by `t`.
    pub fn from_box(gt: &Box3D, t: [f64; 3]) -> BoxTargets {
        let c = gt.center();
        let s = gt.size();
        let bin = heading_bin_of(gt.heading());
        BoxTargets {
            center: [c[0] - t[0], c[1] - t[1], c[2] - t[2]],
            size_log: [s[0].ln(), s[1].ln(), s[2].ln()],
            heading_bin: bin,
            heading_residual: gt.heading() - heading_bin_center(bin),
        }
    }
}

/// Combined box loss: squared error on center residual and log-size,
/// cross-entropy over heading bins, and squared error on the ground-truth
/// bin's residual.
pub fn box_loss_and_grad(
    net: &StageNet,
    centered: &PointCloud,
    targets: &BoxTargets,
) -> Result<(f64, Vec<f64>)> {
    let record = global_forward(net, centered)?;
    let out = record.output();
    let mut d_out = vec![0.0; out.len()];
    let mut loss = 0.0;
    for k in 0..3 {
        let r = out[k] - targets.center[k];
        loss += r * r;
        d_out[k] = 2.0 * r;
    }
    for k in 0..3 {
        let r = out[3 + k] - targets.size_log[k];
        loss += r * r;
        d_out[3 + k] = 2.0 * r;
    }
    let scores = &out[6..6 + HEADING_BINS];
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    loss += log_sum - (scores[targets.heading_bin] - max);
    let probs = softmax(scores)?;
    for b in 0..HEADING_BINS {
        d_out[6 + b] = probs[b] - if b == targets.heading_bin { 1.0 } else { 0.0 };
    }
    let res_idx = 6 + HEADING_BINS + targets.heading_bin;
    let r = out[res_idx] - targets.heading_residual;
    loss += r * r;
    d_out[res_idx] = 2.0 * r;
    let grad = global_backward(net, &record, &d_out)?;
    Ok((loss, grad))
}
