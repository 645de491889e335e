use serde::{Deserialize, Serialize};

use super::mlp::{forward_trace, reverse_pass, Chain, ForwardTrace, LayerRef, Mlp, MlpSpec};
use super::pass::PassScratch;
use crate::error::{Error, Result};
use crate::linalg::{purpose, DenseMatrix, DenseVector, RngStream};

/// Encoder `r(·; θ): ℝᵈ → ℝⁿ` chained with a scalar head `g(·; ψ): ℝⁿ → ℝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    pub encoder: Mlp,
    pub head: Mlp,
}

impl ManifoldModel {
    pub fn new(encoder: Mlp, head: Mlp) -> Result<Self> {
        if encoder.spec.output_dim() != head.spec.input_dim() {
            return Err(Error::invalid(format!(
                "encoder outputs {} values but head expects {}",
                encoder.spec.output_dim(),
                head.spec.input_dim()
            )));
        }
        if head.spec.output_dim() != 1 {
            return Err(Error::invalid("head must produce a scalar"));
        }
        Ok(ManifoldModel { encoder, head })
    }

    /// All weights and biases i.i.d. `N(0, 1)`.
    pub fn init_standard_normal(
        encoder_spec: MlpSpec,
        head_spec: MlpSpec,
        rng: &RngStream,
    ) -> Result<Self> {
        encoder_spec.validate()?;
        head_spec.validate()?;
        let init = rng.derive(purpose::INIT);
        Self::new(
            Mlp::standard_normal(encoder_spec, &init.derive(0)),
            Mlp::standard_normal(head_spec, &init.derive(1)),
        )
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.spec.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.spec.output_dim()
    }

    pub fn theta(&self) -> &[f64] {
        &self.encoder.params
    }

    pub fn psi(&self) -> &[f64] {
        &self.head.params
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.encoder.params, &mut self.head.params)
    }

    pub fn is_finite(&self) -> bool {
        self.theta().iter().chain(self.psi()).all(|p| p.is_finite())
    }

    fn chain(&self) -> Vec<(usize, LayerRef<'_>)> {
        let enc = self.encoder.layers().into_iter().map(|l| (0, l));
        let head = self.head.layers().into_iter().map(|l| (1, l));
        enc.chain(head).collect()
    }

    fn encoder_chain(&self) -> Vec<(usize, LayerRef<'_>)> {
        self.encoder.layers().into_iter().map(|l| (0, l)).collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn full_trace(&self, chain: &Chain<'_>, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        forward_trace(chain, x)
    }

    /// `(r(x; θ), g(r(x; θ); ψ))`.
    pub fn forward(&self, x: &[f64]) -> Result<(DenseVector, f64)> {
        let chain = self.chain();
        let trace = self.full_trace(&chain, x)?;
        let k = self.encoder.spec.num_layers();
        let latent = trace.inputs[k].clone();
        Ok((DenseVector::from_raw(latent), trace.output[0]))
    }

    /// Encoder Jacobian `∂r/∂x` as an `n × d` matrix, one reverse pass per row.
    pub fn input_jacobian(&self, x: &[f64]) -> Result<DenseMatrix> {
        let chain = self.encoder_chain();
        let trace = self.full_trace(&chain, x)?;
        let n = self.latent_dim();
        let d = self.input_dim();
        let mut data = Vec::with_capacity(n * d);
        let mut seed = vec![0.0; n];
        for i in 0..n {
            seed[i] = 1.0;
            let (_, row) = reverse_pass(&chain, &trace, &seed);
            data.extend_from_slice(&row);
            seed[i] = 0.0;
        }
        DenseMatrix::from_row_major(n, d, data)
    }

    /// `∇_z g(z; ψ)`.
    pub fn head_gradient(&self, z: &[f64]) -> Result<DenseVector> {
        let chain: Vec<_> = self.head.layers().into_iter().map(|l| (1, l)).collect();
        if z.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                actual: z.len(),
            });
        }
        let trace = forward_trace(&chain, z)?;
        let (_, grad) = reverse_pass(&chain, &trace, &[1.0]);
        Ok(DenseVector::from_raw(grad))
    }

    /// `∇ₓ g(r(x; θ); ψ)` by one reverse pass through the composition.
    pub fn input_gradient(&self, x: &[f64]) -> Result<DenseVector> {
        let chain = self.chain();
        let trace = self.full_trace(&chain, x)?;
        let (_, grad) = reverse_pass(&chain, &trace, &[1.0]);
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteModel("input gradient"));
        }
        Ok(DenseVector::from_raw(grad))
    }

    /// `uᵀ ∇ₓ g(r(x; θ); ψ)` by a single tangent pass.
    pub fn directional_derivative(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        PassScratch::new(self).value(self, x, u)
    }

    /// Gradient of `directional_derivative(x, u)` with respect to `(θ, ψ)`.
    ///
    /// The tangent pass computes `ż_l = W_l ṫ_{l−1}`, `ṫ_l = σ'(z_l) ⊙ ż_l`.
    /// Both supported activations are piecewise linear, so `σ'` is locally
    /// constant in the parameters and only the tangent path carries gradient:
    /// `∂D/∂W_l = ż̄_l ṫ_{l−1}ᵀ` with `ż̄_l` the reverse-pass adjoint of layer
    /// `l`'s pre-activation, and `∂D/∂b_l = 0`.
    pub fn param_grad_of_directional_derivative(
        &self,
        x: &[f64],
        u: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut gt = vec![0.0; self.theta().len()];
        let mut gp = vec![0.0; self.psi().len()];
        PassScratch::new(self).accumulate(self, x, u, |_| 1.0, &mut gt, &mut gp)?;
        Ok((gt, gp))
    }
}

/// Convenience for tests and diagnostics: `input_jacobianᵀ · head_gradient`.
pub fn chain_rule_gradient(model: &ManifoldModel, x: &[f64]) -> Result<DenseVector> {
    let (z, _) = model.forward(x)?;
    let hg = model.head_gradient(&z)?;
    model.input_jacobian(x)?.mat_t_vec(&hg)
}
