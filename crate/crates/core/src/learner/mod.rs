//! Online manifold learning.
//!
//! The model is fitted to the finite-difference slopes seen so far. For one
//! record the loss is `(y/2δ − uᵀ∇ₓg(r(x)))²`; the regularizer
//! `R = ‖∇ₓg_snap(xᵗ) − ∇ₓg(xᵗ)‖₂` keeps the input gradient at the current
//! iterate close to the previous model's. The objective
//!
//! ```text
//! (1/N) Σᵢ L(recᵢ) + (λ/N) R          (default)
//! Σᵢ L(recᵢ) + λ R                    (raw_sum_mode)
//! ```
//!
//! is minimized by warm-started minibatch SGD with heavy-ball momentum.
//!
//! With `w = (G − G_snap)/‖G − G_snap‖`, `∂R/∂p = ∂(wᵀG)/∂p`, which is the
//! parameter gradient of a directional derivative along the fixed `w`, so
//! both terms reuse the same forward-over-reverse pass.

mod buffer;

use serde::{Deserialize, Serialize};

pub use buffer::ReplayBuffer;

use crate::error::{Error, Result};
use crate::estimators::EvaluationRecord;
use crate::linalg::{purpose, DenseVector, RngStream};
use crate::netdiff::{ManifoldModel, PassScratch};

/// Loss growth factor treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub minibatch: usize,
    pub inner_epochs: usize,
    pub full_resolve_period: u64,
    pub full_resolve_epochs: usize,
    pub reinit_threshold: f64,
    pub buffer_capacity: usize,
    /// Literal `Σ L + λR` instead of the length-normalized objective.
    pub raw_sum_mode: bool,
    /// Feed only full-sphere (exploration) records to the buffer.
    pub exploration_only: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            lambda: 1e3,
            learning_rate: 1e-3,
            momentum: 0.9,
            minibatch: 64,
            inner_epochs: 1,
            full_resolve_period: 100,
            full_resolve_epochs: 200,
            reinit_threshold: 1e-6,
            buffer_capacity: 10_000,
            raw_sum_mode: false,
            exploration_only: false,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: String| Err(Error::Config(format!("learner.{what}: {v}")));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda", format!("must be a finite value ≥ 0, got {}", self.lambda));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate", format!("must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", format!("must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.reinit_threshold >= 0.0) {
            return bad("reinit_threshold", format!("must be ≥ 0, got {}", self.reinit_threshold));
        }
        for (name, v) in [
            ("minibatch", self.minibatch as u64),
            ("inner_epochs", self.inner_epochs as u64),
            ("full_resolve_period", self.full_resolve_period),
            ("full_resolve_epochs", self.full_resolve_epochs as u64),
            ("buffer_capacity", self.buffer_capacity as u64),
        ] {
            if v == 0 {
                return bad(name, "must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub model: ManifoldModel,
    /// Parameters before the latest outer update; the regularizer's anchor.
    pub prev_model_snapshot: ManifoldModel,
    pub momentum_theta: Vec<f64>,
    pub momentum_psi: Vec<f64>,
    pub iteration: u64,
}

impl LearnerState {
    pub fn new(model: ManifoldModel) -> Self {
        let (nt, np) = (model.theta().len(), model.psi().len());
        LearnerState {
            prev_model_snapshot: model.clone(),
            model,
            momentum_theta: vec![0.0; nt],
            momentum_psi: vec![0.0; np],
            iteration: 0,
        }
    }

    fn zero_momentum(&mut self) {
        self.momentum_theta.iter_mut().for_each(|v| *v = 0.0);
        self.momentum_psi.iter_mut().for_each(|v| *v = 0.0);
    }

    fn reinitialize(&mut self, rng: &RngStream) -> Result<()> {
        self.model = fresh_model(&self.model, rng)?;
        self.zero_momentum();
        Ok(())
    }
}

/// What one learner update did, for the learner trace.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub buffer_size: usize,
    pub loss_before: f64,
    pub loss_after: f64,
    pub retried: bool,
    pub reinitialized: bool,
    pub resolved: bool,
}

fn fresh_model(like: &ManifoldModel, rng: &RngStream) -> Result<ManifoldModel> {
    ManifoldModel::init_standard_normal(like.encoder.spec.clone(), like.head.spec.clone(), rng)
}

pub fn one_step_loss(model: &ManifoldModel, rec: &EvaluationRecord) -> Result<f64> {
    let r = rec.y / (2.0 * rec.delta) - model.directional_derivative(&rec.x, &rec.u)?;
    Ok(r * r)
}

/// `‖∇ₓg_snap(x) − ∇ₓg(x)‖₂`.
pub fn regularizer(model: &ManifoldModel, snapshot: &ManifoldModel, x: &DenseVector) -> Result<f64> {
    let g = model.input_gradient(x)?;
    let s = snapshot.input_gradient(x)?;
    Ok(g.iter().zip(s.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

fn weights(cfg: &LearnerConfig, n: usize) -> (f64, f64) {
    if cfg.raw_sum_mode {
        (1.0, cfg.lambda)
    } else {
        (1.0 / n as f64, cfg.lambda / n as f64)
    }
}

/// Full FTRL objective over the buffer.
pub fn total_loss(
    model: &ManifoldModel,
    snapshot: &ManifoldModel,
    buffer: &ReplayBuffer,
    x: &DenseVector,
    cfg: &LearnerConfig,
) -> Result<f64> {
    if buffer.is_empty() {
        return Ok(0.0);
    }
    let (wl, wr) = weights(cfg, buffer.len());
    let sum = loss_sum(model, buffer)?;
    let reg = if wr == 0.0 { 0.0 } else { regularizer(model, snapshot, x)? };
    Ok(wl * sum + wr * reg)
}

/// Mean one-step loss over the buffer, without the regularizer.
pub fn mean_loss(model: &ManifoldModel, buffer: &ReplayBuffer) -> Result<f64> {
    if buffer.is_empty() {
        return Ok(0.0);
    }
    Ok(loss_sum(model, buffer)? / buffer.len() as f64)
}

fn loss_sum(model: &ManifoldModel, buffer: &ReplayBuffer) -> Result<f64> {
    let mut scratch = PassScratch::new(model);
    let mut sum = 0.0;
    for rec in buffer.iter() {
        let r = rec.y / (2.0 * rec.delta) - scratch.value(model, &rec.x, &rec.u)?;
        sum += r * r;
    }
    Ok(sum)
}

/// Analytic gradient of `Σ_batch wl·L + wr·R` with respect to `(θ, ψ)`.
pub fn objective_gradient(
    model: &ManifoldModel,
    snapshot_grad: &DenseVector,
    records: &[&EvaluationRecord],
    x: &DenseVector,
    wl: f64,
    wr: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut gt = vec![0.0; model.theta().len()];
    let mut gp = vec![0.0; model.psi().len()];
    let mut scratch = PassScratch::new(model);
    for rec in records {
        let target = rec.y / (2.0 * rec.delta);
        scratch.accumulate(model, &rec.x, &rec.u, |d| -2.0 * wl * (target - d), &mut gt, &mut gp)?;
    }
    if wr != 0.0 {
        let g = model.input_gradient(x)?;
        let diff: Vec<f64> = g.iter().zip(snapshot_grad.iter()).map(|(a, b)| a - b).collect();
        let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        // R is not differentiable at zero; 0 is a subgradient.
        if norm > 0.0 {
            let w: Vec<f64> = diff.iter().map(|v| v / norm).collect();
            scratch.accumulate(model, x, &w, |_| wr, &mut gt, &mut gp)?;
        }
    }
    Ok((gt, gp))
}

/// Fisher–Yates permutation of `0..n` from a counter-addressed stream.
fn permutation(n: usize, rng: &RngStream) -> Vec<usize> {
    use rand::Rng;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut g = rng.generator();
    for i in (1..n).rev() {
        let j = g.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

struct Sgd<'a> {
    buffer: &'a ReplayBuffer,
    cfg: &'a LearnerConfig,
    x: &'a DenseVector,
    snapshot_grad: DenseVector,
}

impl Sgd<'_> {
    fn epoch(
        &self,
        model: &mut ManifoldModel,
        vt: &mut [f64],
        vp: &mut [f64],
        lr: f64,
        rng: &RngStream,
    ) -> Result<()> {
        let n = self.buffer.len();
        let order = permutation(n, rng);
        let (wl_full, wr) = weights(self.cfg, n);
        for chunk in order.chunks(self.cfg.minibatch) {
            let records: Vec<&EvaluationRecord> =
                chunk.iter().map(|&i| self.buffer.get(i).expect("index in range")).collect();
            // Rescale so each minibatch is an unbiased estimate of the full sum.
            let wl = wl_full * n as f64 / chunk.len() as f64;
            let (gt, gp) = objective_gradient(model, &self.snapshot_grad, &records, self.x, wl, wr)?;
            let mu = self.cfg.momentum;
            let (theta, psi) = model.params_mut();
            for ((p, v), g) in theta.iter_mut().zip(vt.iter_mut()).zip(&gt) {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
            for ((p, v), g) in psi.iter_mut().zip(vp.iter_mut()).zip(&gp) {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
            if !model.is_finite() {
                return Err(Error::NonFiniteModel("parameters"));
            }
        }
        Ok(())
    }
}

fn is_model_failure(e: &Error) -> bool {
    matches!(e, Error::NonFiniteModel(_))
}

/// One FTRL round: `inner_epochs` of SGD warm-started from the current model.
///
/// If the round ends with a higher objective than it started with, it is
/// retried once from the same start at a tenth of the learning rate and the
/// better attempt is kept. Attempts that grow the objective more than
/// [`DIVERGENCE_FACTOR`]-fold are discarded; if both are, the start is kept
/// with zeroed momentum. A non-finite model triggers reinitialization.
pub fn ftrl_step(
    state: &mut LearnerState,
    buffer: &ReplayBuffer,
    cfg: &LearnerConfig,
    current_x: &DenseVector,
    rng: &RngStream,
) -> Result<StepReport> {
    let mut report = StepReport {
        buffer_size: buffer.len(),
        ..Default::default()
    };
    state.iteration += 1;
    if buffer.is_empty() {
        return Ok(report);
    }
    if current_x.dim() != state.model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: state.model.input_dim(),
            actual: current_x.dim(),
        });
    }
    state.prev_model_snapshot = state.model.clone();
    let snapshot = &state.prev_model_snapshot;

    let attempt = (|| -> Result<(ManifoldModel, Vec<f64>, Vec<f64>, f64, f64, bool)> {
        let sgd = Sgd {
            buffer,
            cfg,
            x: current_x,
            snapshot_grad: snapshot.input_gradient(current_x)?,
        };
        let before = total_loss(snapshot, snapshot, buffer, current_x, cfg)?;
        let run = |lr: f64, tag: u64| -> Result<(ManifoldModel, Vec<f64>, Vec<f64>, f64)> {
            let mut m = snapshot.clone();
            let mut vt = state.momentum_theta.clone();
            let mut vp = state.momentum_psi.clone();
            let stream = rng.derive(purpose::MINIBATCH).derive(tag);
            for e in 0..cfg.inner_epochs {
                sgd.epoch(&mut m, &mut vt, &mut vp, lr, &stream.derive(e as u64))?;
            }
            let after = total_loss(&m, snapshot, buffer, current_x, cfg)?;
            if !after.is_finite() {
                return Err(Error::NonFiniteModel("learner loss"));
            }
            Ok((m, vt, vp, after))
        };
        let first = match run(cfg.learning_rate, 0) {
            Ok(r) => Some(r),
            Err(e) if is_model_failure(&e) => None,
            Err(e) => return Err(e),
        };
        if let Some((m, vt, vp, after)) = &first {
            if *after <= before {
                return Ok((m.clone(), vt.clone(), vp.clone(), before, *after, false));
            }
        }
        let retry = match run(cfg.learning_rate / 10.0, 1) {
            Ok(r) => Some(r),
            Err(e) if is_model_failure(&e) => None,
            Err(e) => return Err(e),
        };
        let best = [first, retry]
            .into_iter()
            .flatten()
            .filter(|c| c.3 <= DIVERGENCE_FACTOR * before)
            .min_by(|a, b| a.3.total_cmp(&b.3));
        let best = best.unwrap_or_else(|| {
            (
                snapshot.clone(),
                vec![0.0; state.momentum_theta.len()],
                vec![0.0; state.momentum_psi.len()],
                before,
            )
        });
        Ok((best.0, best.1, best.2, before, best.3, true))
    })();

    match attempt {
        Ok((m, vt, vp, before, after, retried)) => {
            state.model = m;
            state.momentum_theta = vt;
            state.momentum_psi = vp;
            report.loss_before = before;
            report.loss_after = after;
            report.retried = retried;
        }
        Err(e) if is_model_failure(&e) => {
            state.reinitialize(&rng.derive(purpose::REINIT))?;
            report.reinitialized = true;
            report.loss_before = f64::NAN;
            report.loss_after = total_loss(&state.model, &state.prev_model_snapshot, buffer, current_x, cfg)
                .unwrap_or(f64::NAN);
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

/// Refits from a fresh initialization for `full_resolve_epochs` epochs and
/// keeps whichever of {refit, incoming} has the lower objective.
pub fn full_resolve(
    state: &mut LearnerState,
    buffer: &ReplayBuffer,
    cfg: &LearnerConfig,
    current_x: &DenseVector,
    rng: &RngStream,
) -> Result<StepReport> {
    let mut report = StepReport {
        buffer_size: buffer.len(),
        resolved: true,
        ..Default::default()
    };
    if buffer.is_empty() {
        report.resolved = false;
        return Ok(report);
    }
    let incoming = state.model.clone();
    let stream = rng.derive(purpose::RESOLVE);
    let before = match total_loss(&incoming, &incoming, buffer, current_x, cfg) {
        Ok(v) if v.is_finite() => v,
        Ok(_) => f64::INFINITY,
        Err(e) if is_model_failure(&e) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    report.loss_before = before;

    let fitted = (|| -> Result<(ManifoldModel, Vec<f64>, Vec<f64>, f64)> {
        let mut m = fresh_model(&incoming, &stream)?;
        let mut vt = vec![0.0; m.theta().len()];
        let mut vp = vec![0.0; m.psi().len()];
        let sgd = Sgd {
            buffer,
            cfg,
            x: current_x,
            snapshot_grad: incoming.input_gradient(current_x)?,
        };
        let batches = stream.derive(purpose::MINIBATCH);
        for e in 0..cfg.full_resolve_epochs {
            sgd.epoch(&mut m, &mut vt, &mut vp, cfg.learning_rate, &batches.derive(e as u64))?;
        }
        let after = total_loss(&m, &incoming, buffer, current_x, cfg)?;
        Ok((m, vt, vp, after))
    })();

    match fitted {
        Ok((m, vt, vp, after)) if after < before => {
            state.prev_model_snapshot = incoming;
            state.model = m;
            state.momentum_theta = vt;
            state.momentum_psi = vp;
            report.loss_after = after;
        }
        Ok(_) => report.loss_after = before,
        Err(e) if is_model_failure(&e) => report.loss_after = before,
        Err(e) => return Err(e),
    }
    if !report.loss_after.is_finite() {
        state.reinitialize(&rng.derive(purpose::REINIT))?;
        report.reinitialized = true;
    }
    Ok(report)
}

/// Reinitializes the model when the step's gradient estimate is below threshold.
pub fn maybe_reinit(
    state: &mut LearnerState,
    grad_estimate_norm: f64,
    cfg: &LearnerConfig,
    rng: &RngStream,
) -> Result<bool> {
    if grad_estimate_norm < cfg.reinit_threshold {
        state.reinitialize(&rng.derive(purpose::REINIT))?;
        return Ok(true);
    }
    Ok(false)
}

#[cfg(test)]
mod tests;
