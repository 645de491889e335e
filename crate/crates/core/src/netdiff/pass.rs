use super::mlp::Activation;
use super::model::ManifoldModel;
use crate::error::{Error, Result};
use crate::linalg::{axpy_slice, dot_unchecked};

#[derive(Debug, Clone, Copy)]
struct Layer {
    block: usize,
    inputs: usize,
    outputs: usize,
    activation: Activation,
    offset: usize,
    /// Start of this layer's outputs in the flat buffers.
    slot: usize,
}

/// Reusable buffers for the fused forward / tangent / reverse pass used by the
/// learner's inner loop. Built for one architecture; reused across records.
#[derive(Debug, Clone)]
pub(crate) struct PassScratch {
    layers: Vec<Layer>,
    input_dim: usize,
    acts: Vec<f64>,
    slopes: Vec<f64>,
    tangents: Vec<f64>,
    adjoints: Vec<f64>,
}

impl PassScratch {
    pub(crate) fn new(model: &ManifoldModel) -> Self {
        let mut layers = Vec::new();
        let mut slot = 0;
        for (block, mlp) in [&model.encoder, &model.head].into_iter().enumerate() {
            let mut offset = 0;
            for (w, act) in mlp.spec.layer_dims.windows(2).zip(&mlp.spec.activations) {
                layers.push(Layer {
                    block,
                    inputs: w[0],
                    outputs: w[1],
                    activation: *act,
                    offset,
                    slot,
                });
                offset += w[0] * w[1] + w[1];
                slot += w[1];
            }
        }
        PassScratch {
            layers,
            input_dim: model.input_dim(),
            acts: vec![0.0; slot],
            slopes: vec![0.0; slot],
            tangents: vec![0.0; slot],
            adjoints: vec![0.0; slot],
        }
    }

    fn check(&self, x: &[f64], u: &[f64]) -> Result<()> {
        for v in [x, u] {
            if v.len() != self.input_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim,
                    actual: v.len(),
                });
            }
        }
        Ok(())
    }

    /// Forward and tangent passes; returns `uᵀ ∇ₓ g(r(x))`.
    fn forward_tangent(&mut self, model: &ManifoldModel, x: &[f64], u: &[f64]) -> Result<f64> {
        self.check(x, u)?;
        let params = [model.theta(), model.psi()];
        for l in 0..self.layers.len() {
            let layer = self.layers[l];
            let p = params[layer.block];
            let nw = layer.inputs * layer.outputs;
            let weights = &p[layer.offset..layer.offset + nw];
            let bias = &p[layer.offset + nw..layer.offset + nw + layer.outputs];
            let (done_a, rest_a) = self.acts.split_at_mut(layer.slot);
            let (done_t, rest_t) = self.tangents.split_at_mut(layer.slot);
            let (a_in, t_in) = if l == 0 {
                (x, u)
            } else {
                let prev = self.layers[l - 1].slot;
                (&done_a[prev..], &done_t[prev..])
            };
            let out_a = &mut rest_a[..layer.outputs];
            let out_t = &mut rest_t[..layer.outputs];
            let slopes = &mut self.slopes[layer.slot..layer.slot + layer.outputs];
            for i in 0..layer.outputs {
                let row = &weights[i * layer.inputs..(i + 1) * layer.inputs];
                let z = dot_unchecked(row, a_in) + bias[i];
                if !z.is_finite() {
                    return Err(Error::NonFiniteModel("forward pass"));
                }
                let s = layer.activation.slope(z);
                slopes[i] = s;
                out_a[i] = layer.activation.apply(z);
                out_t[i] = if s == 0.0 { 0.0 } else { s * dot_unchecked(row, t_in) };
            }
        }
        let last = self.layers.last().expect("non-empty chain");
        let value = self.tangents[last.slot];
        if !value.is_finite() {
            return Err(Error::NonFiniteModel("directional derivative"));
        }
        Ok(value)
    }

    pub(crate) fn value(&mut self, model: &ManifoldModel, x: &[f64], u: &[f64]) -> Result<f64> {
        self.forward_tangent(model, x, u)
    }

    /// Computes `D = uᵀ ∇ₓ g(r(x))`, then adds `coeff(D) · ∂D/∂(θ, ψ)` to the
    /// gradient buffers. Returns `D`.
    pub(crate) fn accumulate(
        &mut self,
        model: &ManifoldModel,
        x: &[f64],
        u: &[f64],
        coeff: impl FnOnce(f64) -> f64,
        grad_theta: &mut [f64],
        grad_psi: &mut [f64],
    ) -> Result<f64> {
        let value = self.forward_tangent(model, x, u)?;
        let c = coeff(value);
        if c == 0.0 {
            return Ok(value);
        }
        let params = [model.theta(), model.psi()];
        let top = self.layers.len() - 1;
        // Output is scalar, so the seed adjoint is the last slope.
        self.adjoints[self.layers[top].slot] = self.slopes[self.layers[top].slot];
        for l in (0..=top).rev() {
            let layer = self.layers[l];
            let adj = &self.adjoints[layer.slot..layer.slot + layer.outputs];
            if adj.iter().all(|a| *a == 0.0) {
                // Nothing flows further down.
                if l > 0 {
                    let prev = self.layers[l - 1];
                    self.adjoints[prev.slot..prev.slot + prev.outputs].fill(0.0);
                }
                continue;
            }
            let t_in = if l == 0 {
                u
            } else {
                let prev = self.layers[l - 1].slot;
                &self.tangents[prev..prev + layer.inputs]
            };
            let dst: &mut [f64] = if layer.block == 0 {
                &mut *grad_theta
            } else {
                &mut *grad_psi
            };
            for (i, a) in adj.iter().enumerate() {
                if *a != 0.0 {
                    let row = &mut dst[layer.offset + i * layer.inputs..][..layer.inputs];
                    axpy_slice(c * a, t_in, row);
                }
            }
            if l > 0 {
                let prev = self.layers[l - 1];
                let p = params[layer.block];
                let weights = &p[layer.offset..layer.offset + layer.inputs * layer.outputs];
                let (lower, upper) = self.adjoints.split_at_mut(layer.slot);
                let adj = &upper[..layer.outputs];
                let down = &mut lower[prev.slot..prev.slot + prev.outputs];
                down.fill(0.0);
                for (i, a) in adj.iter().enumerate() {
                    if *a != 0.0 {
                        axpy_slice(*a, &weights[i * layer.inputs..(i + 1) * layer.inputs], down);
                    }
                }
                for (dv, s) in down.iter_mut().zip(&self.slopes[prev.slot..prev.slot + prev.outputs]) {
                    *dv *= s;
                }
            }
        }
        Ok(value)
    }
}
