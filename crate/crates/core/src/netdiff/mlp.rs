use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy_slice, dot_unchecked, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative, with the ReLU slope at exactly 0 taken as 0.
    #[inline]
    pub(crate) fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Layer widths `[in, h₁, …, out]` and one activation per linear layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = MlpSpec {
            layer_dims,
            activations,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// ReLU between layers, identity on the last one.
    pub fn relu_stack(layer_dims: Vec<usize>) -> Result<Self> {
        let layers = layer_dims.len().saturating_sub(1);
        let mut acts = vec![Activation::Relu; layers];
        if let Some(last) = acts.last_mut() {
            *last = Activation::Identity;
        }
        Self::new(layer_dims, acts)
    }

    /// Learner encoder `ℝᵈ → ℝⁿ`:
    /// `Linear(d,2n) → ReLU → Linear(2n,n) → ReLU → Linear(n,n)` for `d ≤ 1000`, with an
    /// extra leading `Linear(d, d/2)` layer above that.
    pub fn encoder(d: usize, n: usize) -> Result<Self> {
        if d > 1000 {
            Self::relu_stack(vec![d, d / 2, 2 * n, n, n])
        } else {
            Self::relu_stack(vec![d, 2 * n, n, n])
        }
    }

    /// Learner head `ℝⁿ → ℝ`: `Linear(n,n) → ReLU → Linear(n,1)`.
    pub fn head(n: usize) -> Result<Self> {
        Self::relu_stack(vec![n, n, 1])
    }

    /// Planted encoder of the synthetic problems: `Linear(d,2n) → ReLU → Linear(2n,n)`.
    pub fn synthetic_encoder(d: usize, n: usize) -> Result<Self> {
        Self::relu_stack(vec![d, 2 * n, n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::invalid("an MLP needs at least one layer"));
        }
        if self.activations.len() != self.layer_dims.len() - 1 {
            return Err(Error::invalid(format!(
                "{} layers but {} activations",
                self.layer_dims.len() - 1,
                self.activations.len()
            )));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated")
    }

    pub fn num_layers(&self) -> usize {
        self.activations.len()
    }

    /// Parameter count: per layer, `out × in` weights then `out` biases.
    pub fn num_params(&self) -> usize {
        self.layer_dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// An MLP with its flat parameter vector.
///
/// Layout: layers in order; within a layer the weight matrix row-major
/// (`outputs × inputs`) followed by the bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn new(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.num_params() {
            return Err(Error::DimensionMismatch {
                expected: spec.num_params(),
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("MLP parameters must be finite"));
        }
        Ok(Mlp { spec, params })
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let params = vec![0.0; spec.num_params()];
        Mlp { spec, params }
    }

    /// Every weight and bias i.i.d. `N(0, 1)`.
    pub fn standard_normal(spec: MlpSpec, rng: &RngStream) -> Self {
        let mut g = rng.generator();
        let params = (0..spec.num_params())
            .map(|_| g.sample(StandardNormal))
            .collect();
        Mlp { spec, params }
    }

    pub(crate) fn layers(&self) -> Vec<LayerRef<'_>> {
        let mut out = Vec::with_capacity(self.spec.num_layers());
        let mut offset = 0;
        for (w, act) in self.spec.layer_dims.windows(2).zip(&self.spec.activations) {
            let (inputs, outputs) = (w[0], w[1]);
            let nw = inputs * outputs;
            out.push(LayerRef {
                inputs,
                outputs,
                activation: *act,
                weights: &self.params[offset..offset + nw],
                bias: &self.params[offset + nw..offset + nw + outputs],
            });
            offset += nw + outputs;
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim(),
                actual: x.len(),
            });
        }
        let chain: Vec<_> = self.layers().into_iter().map(|l| (0, l)).collect();
        Ok(forward_trace(&chain, x)?.output)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerRef<'a> {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

impl LayerRef<'_> {
    #[inline]
    fn weight_row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.inputs..(i + 1) * self.inputs]
    }

    /// `W v`
    fn apply_weights(&self, v: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|i| dot_unchecked(self.weight_row(i), v))
            .collect()
    }

    /// `Wᵀ v`
    fn apply_weights_t(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.inputs];
        for (i, vi) in v.iter().enumerate() {
            if *vi != 0.0 {
                axpy_slice(*vi, self.weight_row(i), &mut out);
            }
        }
        out
    }
}

/// A sequence of layers tagged with the index of the parameter block they
/// belong to (0 = encoder, 1 = head).
pub(crate) type Chain<'a> = [(usize, LayerRef<'a>)];

/// Primal pass record: the input to every layer and the activation slope at
/// every pre-activation.
pub(crate) struct ForwardTrace {
    pub inputs: Vec<Vec<f64>>,
    pub slopes: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

pub(crate) fn forward_trace(chain: &Chain<'_>, x: &[f64]) -> Result<ForwardTrace> {
    let mut inputs = Vec::with_capacity(chain.len());
    let mut slopes = Vec::with_capacity(chain.len());
    let mut a = x.to_vec();
    for (_, layer) in chain {
        let mut z = layer.apply_weights(&a);
        for (zi, bi) in z.iter_mut().zip(layer.bias) {
            *zi += bi;
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteModel("forward pass"));
        }
        slopes.push(z.iter().map(|&v| layer.activation.slope(v)).collect());
        let next = z.iter().map(|&v| layer.activation.apply(v)).collect();
        inputs.push(std::mem::replace(&mut a, next));
    }
    Ok(ForwardTrace {
        inputs,
        slopes,
        output: a,
    })
}

/// Reverse pass seeded with `seed` at the chain output. Returns the adjoint of
/// every layer's pre-activation and the adjoint of the chain input.
pub(crate) fn reverse_pass(
    chain: &Chain<'_>,
    trace: &ForwardTrace,
    seed: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut pre_adjoints = vec![Vec::new(); chain.len()];
    let mut adj = seed.to_vec();
    for (l, (_, layer)) in chain.iter().enumerate().rev() {
        for (a, s) in adj.iter_mut().zip(&trace.slopes[l]) {
            *a *= s;
        }
        let input_adj = layer.apply_weights_t(&adj);
        pre_adjoints[l] = std::mem::replace(&mut adj, input_adj);
    }
    (pre_adjoints, adj)
}
