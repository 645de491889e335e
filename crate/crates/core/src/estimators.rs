//! Antithetic zeroth-order gradient estimators.
//!
//! For a direction `u` the pair `y = F(x + δu, ξ⁺) − F(x − δu, ξ⁻)` is a
//! finite-difference probe of the slope along `u`. Averaging
//! `(m / 2δ) · y · u` over directions uniform on an `m`-dimensional unit
//! sphere gives an unbiased estimate of the δ-smoothed gradient (restricted to
//! the sphere's span when `m < d`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt, purpose, sample_unit_sphere, DenseMatrix, DenseVector, RngStream};
use crate::problems::Objective;

/// How the `k` per-direction terms are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// `(m/2δ) · (1/k) Σ yᵢuᵢ`; the step size does not depend on `k`.
    #[default]
    Mean,
    /// `(m/2δ) · Σ yᵢuᵢ`, the literal algorithm-box form.
    Sum,
}

/// One antithetic probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub x: DenseVector,
    /// Unit direction in the input space.
    pub u: DenseVector,
    pub y: f64,
    pub delta: f64,
    pub iteration: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub g: DenseVector,
    pub lifted_directions: Vec<DenseVector>,
    pub y_values: Vec<f64>,
    pub delta: f64,
    pub evals_used: u64,
    /// Dimension of the sampling sphere (`d`, or the retained Jacobian rank).
    pub sphere_dim: usize,
    pub aggregation: Aggregation,
    /// Set when a manifold estimate had to fall back to full-space sampling.
    pub fallback: bool,
}

impl GradientEstimate {
    pub fn k(&self) -> usize {
        self.y_values.len()
    }

    /// Recombines a subset of the probes with the same scaling rule.
    pub fn recombine(&self, keep: &[usize]) -> DenseVector {
        combine(
            self.g.dim(),
            self.sphere_dim,
            self.delta,
            self.aggregation,
            keep.iter().map(|&i| (self.y_values[i], &self.lifted_directions[i])),
        )
    }

    /// Records for the replay buffer, one per direction.
    pub fn records(&self, x: &DenseVector, iteration: u64) -> Vec<EvaluationRecord> {
        self.lifted_directions
            .iter()
            .zip(&self.y_values)
            .map(|(u, &y)| EvaluationRecord {
                x: x.clone(),
                u: u.clone(),
                y,
                delta: self.delta,
                iteration,
            })
            .collect()
    }
}

fn combine<'a>(
    dim: usize,
    sphere_dim: usize,
    delta: f64,
    aggregation: Aggregation,
    terms: impl Iterator<Item = (f64, &'a DenseVector)>,
) -> DenseVector {
    let mut g = vec![0.0; dim];
    let mut count = 0usize;
    for (y, u) in terms {
        for (gi, ui) in g.iter_mut().zip(u.iter()) {
            *gi += y * ui;
        }
        count += 1;
    }
    let mut scale = sphere_dim as f64 / (2.0 * delta);
    if aggregation == Aggregation::Mean && count > 0 {
        scale /= count as f64;
    }
    g.iter_mut().for_each(|v| *v *= scale);
    DenseVector::from_raw(g)
}

fn check_common(f: &Objective, x: &DenseVector, delta: f64, k: usize) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("smoothing radius must be positive, got {delta}")));
    }
    if k == 0 {
        return Err(Error::invalid("need at least one direction"));
    }
    if x.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            actual: x.dim(),
        });
    }
    Ok(())
}

/// Evaluates the antithetic pair along `u`. Noise seeds come from
/// `noise.seed_u64(2i)` and `noise.seed_u64(2i + 1)`.
fn antithetic(f: &Objective, x: &[f64], u: &[f64], delta: f64, noise: &RngStream, i: u64) -> Result<f64> {
    let plus: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + delta * b).collect();
    let minus: Vec<f64> = x.iter().zip(u).map(|(a, b)| a - delta * b).collect();
    let fp = f.eval(&plus, noise.seed_u64(2 * i));
    if !fp.is_finite() {
        return Err(Error::NonFiniteObjective { point: plus, value: fp });
    }
    let fm = f.eval(&minus, noise.seed_u64(2 * i + 1));
    if !fm.is_finite() {
        return Err(Error::NonFiniteObjective { point: minus, value: fm });
    }
    Ok(fp - fm)
}

/// Full-space estimator with `k` directions uniform on `𝕊^{d−1}`; `2k` evaluations.
pub fn grad_est(f: &Objective, x: &DenseVector, delta: f64, k: usize, rng: &RngStream) -> Result<GradientEstimate> {
    grad_est_with(f, x, delta, k, rng, Aggregation::Mean)
}

pub fn grad_est_with(
    f: &Objective,
    x: &DenseVector,
    delta: f64,
    k: usize,
    rng: &RngStream,
    aggregation: Aggregation,
) -> Result<GradientEstimate> {
    check_common(f, x, delta, k)?;
    let d = x.dim();
    let dirs = rng.derive(purpose::DIRECTION);
    let noise = rng.derive(purpose::NOISE);
    let mut lifted = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for i in 0..k as u64 {
        let s = sample_unit_sphere(d, &dirs.derive(i))?;
        ys.push(antithetic(f, x, &s, delta, &noise, i)?);
        lifted.push(s);
    }
    let g = combine(d, d, delta, aggregation, ys.iter().copied().zip(&lifted));
    Ok(GradientEstimate {
        g,
        lifted_directions: lifted,
        y_values: ys,
        delta,
        evals_used: 2 * k as u64,
        sphere_dim: d,
        aggregation,
        fallback: false,
    })
}

/// Tangent-space estimator. `jacobian` is `∂r/∂x` (`n × d`); its transpose is
/// orthonormalized and directions `J_q s̃` with `s̃` uniform on the
/// `n_eff`-sphere are probed. A zero Jacobian falls back to [`grad_est`].
pub fn manifold_grad_est(
    f: &Objective,
    x: &DenseVector,
    jacobian: &DenseMatrix,
    delta: f64,
    k: usize,
    rng: &RngStream,
) -> Result<GradientEstimate> {
    manifold_grad_est_with(f, x, jacobian, delta, k, rng, Aggregation::Mean)
}

pub fn manifold_grad_est_with(
    f: &Objective,
    x: &DenseVector,
    jacobian: &DenseMatrix,
    delta: f64,
    k: usize,
    rng: &RngStream,
    aggregation: Aggregation,
) -> Result<GradientEstimate> {
    check_common(f, x, delta, k)?;
    if jacobian.cols() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            actual: jacobian.cols(),
        });
    }
    let basis = gram_schmidt(&jacobian.transpose());
    if basis.rank == 0 {
        let mut est = grad_est_with(f, x, delta, k, rng, aggregation)?;
        est.fallback = true;
        return Ok(est);
    }
    let d = x.dim();
    let dirs = rng.derive(purpose::DIRECTION);
    let noise = rng.derive(purpose::NOISE);
    let mut lifted = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for i in 0..k as u64 {
        let s = sample_unit_sphere(basis.rank, &dirs.derive(i))?;
        let u = basis.q.matvec(&s)?;
        ys.push(antithetic(f, x, &u, delta, &noise, i)?);
        lifted.push(u);
    }
    let g = combine(d, basis.rank, delta, aggregation, ys.iter().copied().zip(&lifted));
    Ok(GradientEstimate {
        g,
        lifted_directions: lifted,
        y_values: ys,
        delta,
        evals_used: 2 * k as u64,
        sphere_dim: basis.rank,
        aggregation,
        fallback: false,
    })
}

/// Weights `(β k_e/(k_e+k_m), (1−β) k_m/(k_e+k_m))` for the exploration and
/// manifold estimates.
pub fn mixing_weights(beta: f64, k_e: usize, k_m: usize) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("mixing weight must lie in [0, 1], got {beta}")));
    }
    let total = (k_e + k_m) as f64;
    if total == 0.0 {
        return Err(Error::invalid("no directions to mix"));
    }
    Ok((beta * k_e as f64 / total, (1.0 - beta) * k_m as f64 / total))
}

pub fn mix_gradients(g_e: &GradientEstimate, g_m: &GradientEstimate, beta: f64) -> Result<DenseVector> {
    mix_vectors(&g_e.g, g_e.k(), &g_m.g, g_m.k(), beta)
}

pub(crate) fn mix_vectors(g_e: &DenseVector, k_e: usize, g_m: &DenseVector, k_m: usize, beta: f64) -> Result<DenseVector> {
    if g_e.dim() != g_m.dim() {
        return Err(Error::DimensionMismatch {
            expected: g_e.dim(),
            actual: g_m.dim(),
        });
    }
    let (we, wm) = mixing_weights(beta, k_e, k_m)?;
    Ok(DenseVector::from_raw(
        g_e.iter().zip(g_m.iter()).map(|(a, b)| we * a + wm * b).collect(),
    ))
}
