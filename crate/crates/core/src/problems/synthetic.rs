use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::objective::{Objective, ProblemDescriptor};
use crate::error::{Error, Result};
use crate::linalg::{purpose, symmetric_eigen, DenseMatrix, DenseVector, RngStream};
use crate::netdiff::{ManifoldModel, Mlp, MlpSpec};

/// Lower clip for the eigenvalues of the sampled quadratic form.
pub const MIN_EIGENVALUE: f64 = 1e-3;

/// Options for [`make_synthetic_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOptions {
    /// Scale encoder weights by `1/√fan_in`. With raw `N(0,1)` weights the
    /// latent grows like `√d` and the objective like `d²`.
    pub fan_in_scaling: bool,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions {
            fan_in_scaling: true,
        }
    }
}

/// `f(x) = zᵀ A z + bᵀ z + c` with `z = r(x; θ⋆)` a planted ReLU encoder.
#[derive(Debug, Clone)]
pub struct SyntheticManifoldProblem {
    pub d: usize,
    pub n: usize,
    pub planted_encoder: Mlp,
    pub quad_matrix: DenseMatrix,
    pub quad_vector: DenseVector,
    pub quad_offset: f64,
}

impl SyntheticManifoldProblem {
    pub fn latent(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.planted_encoder.forward(x)
    }

    pub fn quadratic(&self, z: &[f64]) -> f64 {
        let az = self.quad_matrix.matvec(z).expect("latent dimension");
        let zaz: f64 = z.iter().zip(az.iter()).map(|(a, b)| a * b).sum();
        let bz: f64 = z.iter().zip(self.quad_vector.iter()).map(|(a, b)| a * b).sum();
        zaz + bz + self.quad_offset
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.latent(x) {
            Ok(z) => self.quadratic(&z),
            Err(_) => f64::NAN,
        }
    }

    /// Planted encoder Jacobian `∂r/∂x` (`n × d`), the oracle for manifold random search.
    pub fn encoder_jacobian(&self, x: &[f64]) -> Result<DenseMatrix> {
        self.encoder_model().input_jacobian(x)
    }

    /// Exact gradient `Jᵀ (2Az + b)`.
    pub fn gradient(&self, x: &[f64]) -> Result<DenseVector> {
        let z = self.latent(x)?;
        let az = self.quad_matrix.matvec(&z)?;
        let outer: Vec<f64> = az
            .iter()
            .zip(self.quad_vector.iter())
            .map(|(a, b)| 2.0 * a + b)
            .collect();
        self.encoder_jacobian(x)?.mat_t_vec(&outer)
    }

    /// Unconstrained minimum over the latent, `c − ¼ bᵀA⁻¹b`. The objective
    /// reaches it only if the minimizing latent lies in the encoder's image.
    pub fn latent_minimum(&self) -> f64 {
        let eig = symmetric_eigen(&self.quad_matrix).expect("symmetric by construction");
        let mut s = 0.0;
        for (k, lam) in eig.values.iter().enumerate() {
            let proj: f64 = (0..self.n)
                .map(|i| eig.vectors.get(i, k) * self.quad_vector[i])
                .sum();
            s += proj * proj / lam;
        }
        self.quad_offset - 0.25 * s
    }

    /// `c − ‖b‖² / (4ε)`, a bound valid for any latent.
    pub fn lower_bound(&self) -> f64 {
        self.quad_offset - self.quad_vector.norm().powi(2) / (4.0 * MIN_EIGENVALUE)
    }

    fn encoder_model(&self) -> ManifoldModel {
        let head = Mlp::zeros(MlpSpec::relu_stack(vec![self.n, 1]).expect("valid"));
        ManifoldModel::new(self.planted_encoder.clone(), head).expect("conforming")
    }
}

/// Symmetrize and clip eigenvalues below at `eps`.
pub fn project_psd(raw: &DenseMatrix, eps: f64) -> Result<DenseMatrix> {
    let n = raw.rows();
    let mut sym = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sym.set(i, j, 0.5 * (raw.get(i, j) + raw.get(j, i)));
        }
    }
    let eig = symmetric_eigen(&sym)?;
    let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(eps)).collect();
    let mut out = eig.compose(&clipped);
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (out.get(i, j) + out.get(j, i));
            out.set(i, j, m);
            out.set(j, i, m);
        }
    }
    Ok(out)
}

pub fn make_synthetic(d: usize, n: usize, rng: &RngStream) -> Result<(Objective, Arc<SyntheticManifoldProblem>)> {
    make_synthetic_with(d, n, rng, SyntheticOptions::default())
}

/// Samples a planted encoder `Linear(d,2n) → ReLU → Linear(2n,n)` and a random
/// convex quadratic on its latent.
pub fn make_synthetic_with(
    d: usize,
    n: usize,
    rng: &RngStream,
    options: SyntheticOptions,
) -> Result<(Objective, Arc<SyntheticManifoldProblem>)> {
    if n == 0 || n > d {
        return Err(Error::invalid(format!("synthetic problem needs 1 ≤ n ≤ d, got n={n}, d={d}")));
    }
    let stream = rng.derive(purpose::PROBLEM);
    let spec = MlpSpec::synthetic_encoder(d, n)?;
    let mut encoder = Mlp::standard_normal(spec, &stream.derive(0));
    if options.fan_in_scaling {
        let dims = encoder.spec.layer_dims.clone();
        let mut offset = 0;
        for w in dims.windows(2) {
            let nw = w[0] * w[1];
            let s = 1.0 / (w[0] as f64).sqrt();
            encoder.params[offset..offset + nw].iter_mut().for_each(|p| *p *= s);
            offset += nw + w[1];
        }
    }

    let mut g = stream.derive(1).generator();
    let raw: Vec<f64> = (0..n * n).map(|_| g.sample(StandardNormal)).collect();
    let quad_matrix = project_psd(&DenseMatrix::from_row_major(n, n, raw)?, MIN_EIGENVALUE)?;
    let quad_vector = DenseVector::new((0..n).map(|_| g.sample(StandardNormal)).collect())?;
    let quad_offset: f64 = g.sample(StandardNormal);

    let problem = Arc::new(SyntheticManifoldProblem {
        d,
        n,
        planted_encoder: encoder,
        quad_matrix,
        quad_vector,
        quad_offset,
    });
    let descriptor = ProblemDescriptor {
        name: "synthetic".into(),
        dim: d,
        n: Some(n),
        seed: Some(rng.master_seed),
        sigma: 0.0,
    };
    let p = Arc::clone(&problem);
    let objective = Objective::new(d, descriptor, move |x, _| p.value(x));
    Ok((objective, problem))
}
