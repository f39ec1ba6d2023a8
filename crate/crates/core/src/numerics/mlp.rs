//! Flat-parameter multilayer perceptron.
//!
//! A network is described by an [`MlpLayout`]: a layer-width list (including
//! the input width) plus the hidden activation kind. Parameters live in one
//! flat vector with a documented layout — for each layer, the weight matrix
//! (`out x in`, row-major) followed by the bias vector. Hidden layers apply
//! the activation and, optionally, a dropout mask; the final layer is always
//! linear and produces raw scores.

use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Hidden-layer activation kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

/// Layer-width list plus hidden activation. `widths[0]` is the input width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpLayout {
    widths: Vec<usize>,
    hidden: Activation,
}

impl MlpLayout {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "layout needs an input width and at least one layer".into(),
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        Ok(MlpLayout {
            widths,
            hidden: Activation::Relu,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of weight layers.
    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn in_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Total flat-parameter length: per layer `in*out` weights plus `out` biases.
    pub fn param_len(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Offset of layer `l`'s weights in the flat vector.
    fn layer_offset(&self, l: usize) -> usize {
        self.widths[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// He-uniform weights and `1/sqrt(fan_in)`-uniform biases. Draw order is
    /// fixed: layer by layer, weights row-major, then that layer's biases.
    pub fn init_params(&self, rng: &mut Rng) -> Vec<f64> {
        let mut params = vec![0.0; self.param_len()];
        for l in 0..self.n_layers() {
            let (in_dim, out_dim) = (self.widths[l], self.widths[l + 1]);
            let w_limit = (6.0 / in_dim as f64).sqrt();
            let b_limit = 1.0 / (in_dim as f64).sqrt();
            let off = self.layer_offset(l);
            for w in &mut params[off..off + in_dim * out_dim] {
                *w = (rng.uniform() * 2.0 - 1.0) * w_limit;
            }
            for b in &mut params[off + in_dim * out_dim..off + in_dim * out_dim + out_dim] {
                *b = (rng.uniform() * 2.0 - 1.0) * b_limit;
            }
        }
        params
    }
}

/// Inverted-dropout multipliers for each hidden layer: an entry is either
/// `0` (dropped) or `1/(1-rate)` (kept, pre-scaled so inference needs no
/// weight rescaling).
#[derive(Debug, Clone)]
pub struct DropoutMask {
    per_layer: Vec<Vec<f64>>,
}

impl DropoutMask {
    /// Sample a mask for every hidden layer of `layout` at the given rate.
    /// Draw order is fixed: layer by layer, unit by unit.
    pub fn sample(layout: &MlpLayout, rate: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate}")));
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let per_layer = (0..layout.n_layers().saturating_sub(1))
            .map(|l| {
                (0..layout.widths[l + 1])
                    .map(|_| if rng.uniform() < rate { 0.0 } else { keep_scale })
                    .collect()
            })
            .collect();
        Ok(DropoutMask { per_layer })
    }

    fn check(&self, layout: &MlpLayout) -> Result<()> {
        if self.per_layer.len() != layout.n_layers() - 1
            || self
                .per_layer
                .iter()
                .zip(&layout.widths[1..])
                .any(|(m, &w)| m.len() != w)
        {
            return Err(Error::ShapeMismatch("dropout mask vs layout".into()));
        }
        Ok(())
    }
}

/// Per-layer activations from a forward pass. `activations[0]` is the input;
/// the last entry is the raw (linear) output. Hidden entries are post-
/// activation and post-mask, i.e. exactly what fed the next layer.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

/// Gradient of a scalar loss with respect to the flat parameters and the input.
#[derive(Debug, Clone)]
pub struct MlpGrad {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

fn check_shapes(params: &[f64], layout: &MlpLayout, input: &[f64]) -> Result<()> {
    if params.len() != layout.param_len() {
        return Err(Error::ShapeMismatch(format!(
            "params len {} vs layout len {}",
            params.len(),
            layout.param_len()
        )));
    }
    if input.len() != layout.in_dim() {
        return Err(Error::ShapeMismatch(format!(
            "input len {} vs in_dim {}",
            input.len(),
            layout.in_dim()
        )));
    }
    Ok(())
}

/// Forward pass; deterministic given the inputs and the optional mask.
pub fn mlp_forward(
    params: &[f64],
    layout: &MlpLayout,
    input: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<MlpTrace> {
    check_shapes(params, layout, input)?;
    if let Some(m) = mask {
        m.check(layout)?;
    }
    let n_layers = layout.n_layers();
    let mut activations = Vec::with_capacity(n_layers + 1);
    activations.push(input.to_vec());
    for l in 0..n_layers {
        let (in_dim, out_dim) = (layout.widths[l], layout.widths[l + 1]);
        let off = layout.layer_offset(l);
        let weights = &params[off..off + in_dim * out_dim];
        let biases = &params[off + in_dim * out_dim..off + in_dim * out_dim + out_dim];
        let a_in = &activations[l];
        let mut z: Vec<f64> = (0..out_dim)
            .map(|o| {
                let row = &weights[o * in_dim..(o + 1) * in_dim];
                biases[o] + row.iter().zip(a_in).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect();
        if l < n_layers - 1 {
            for x in &mut z {
                *x = x.max(0.0); // Activation::Relu
            }
            if let Some(m) = mask {
                for (x, &s) in z.iter_mut().zip(&m.per_layer[l]) {
                    *x *= s;
                }
            }
        }
        activations.push(z);
    }
    Ok(MlpTrace { activations })
}

/// Backward pass from an explicit input; runs the forward pass internally.
/// Returns the parameter gradient (same length as `params`) and the input
/// gradient.
pub fn mlp_backward(
    params: &[f64],
    layout: &MlpLayout,
    input: &[f64],
    upstream: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<MlpGrad> {
    let trace = mlp_forward(params, layout, input, mask)?;
    backward_from_trace(params, layout, &trace, upstream, mask)
}

/// Backward pass reusing a stored forward trace (the training hot path).
pub fn backward_from_trace(
    params: &[f64],
    layout: &MlpLayout,
    trace: &MlpTrace,
    upstream: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<MlpGrad> {
    if upstream.len() != layout.out_dim() {
        return Err(Error::ShapeMismatch(format!(
            "upstream len {} vs out_dim {}",
            upstream.len(),
            layout.out_dim()
        )));
    }
    let n_layers = layout.n_layers();
    let mut grad = vec![0.0; layout.param_len()];
    let mut delta = upstream.to_vec();
    for l in (0..n_layers).rev() {
        let (in_dim, out_dim) = (layout.widths[l], layout.widths[l + 1]);
        let off = layout.layer_offset(l);
        let weights = &params[off..off + in_dim * out_dim];
        let a_in = &trace.activations[l];
        let a_out = &trace.activations[l + 1];

        // dz: through the mask and activation for hidden layers. Post-mask
        // activations suffice: a dropped unit contributes zero either way,
        // and a kept unit is positive iff its pre-activation was.
        let dz: Vec<f64> = if l < n_layers - 1 {
            (0..out_dim)
                .map(|o| {
                    let scale = mask.map_or(1.0, |m| m.per_layer[l][o]);
                    if a_out[o] > 0.0 {
                        delta[o] * scale
                    } else {
                        0.0
                    }
                })
                .collect()
        } else {
            delta.clone()
        };

        let mut d_in = vec![0.0; in_dim];
        for o in 0..out_dim {
            grad[off + in_dim * out_dim + o] = dz[o];
            let row = o * in_dim;
            for i in 0..in_dim {
                grad[off + row + i] = dz[o] * a_in[i];
                d_in[i] += weights[row + i] * dz[o];
            }
        }
        delta = d_in;
    }
    Ok(MlpGrad {
        params: grad,
        input: delta,
    })
}
