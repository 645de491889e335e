//! Random search, manifold random search with an oracle Jacobian, and
//! learned manifold random search (LMRS).
//!
//! All three share one loop: estimate `g` at `xᵗ`, step `xᵗ⁺¹ = xᵗ − α g`,
//! log a trace row. Iteration `t` draws from `rng.derive(ITERATION).derive(t)`
//! so that runs are reproducible regardless of how the work is scheduled.
//! The trace's `f` column is an extra evaluation at each iterate, counted as
//! a probe evaluation and kept out of the budget.

mod config;
mod trace;

use std::time::Instant;

pub use config::{Beta, OptimizerConfig};
pub use trace::{
    stationarity_check, LearnerRow, RunTrace, StopReason, TraceRow, LEARNER_HEADER, PLATEAU_TOL, TRACE_HEADER,
};

use crate::error::{Error, Result};
use crate::estimators::{grad_est_with, manifold_grad_est_with, mixing_weights, GradientEstimate};
use crate::learner::{self, LearnerConfig, LearnerState, ReplayBuffer};
use crate::linalg::{gram_schmidt, purpose, DenseMatrix, DenseVector, RngStream};
use crate::metrics::projection_residual;
use crate::netdiff::{ManifoldModel, MlpSpec};
use crate::problems::Objective;

/// A failed run: the error and everything logged before it.
#[derive(Debug)]
pub struct RunError {
    pub error: Error,
    pub trace: RunTrace,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} iterations: {}", self.trace.iterations(), self.error)
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunError> for Error {
    fn from(e: RunError) -> Error {
        e.error
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

/// Jacobian oracle for manifold random search, `x ↦ ∂r/∂x` (`n × d`).
pub type JacobianOracle<'a> = dyn Fn(&[f64]) -> Result<DenseMatrix> + 'a;

/// Outcome of an LMRS run.
#[derive(Debug, Clone)]
pub struct LmrsOutcome {
    pub x_final: DenseVector,
    pub trace: RunTrace,
    pub model: ManifoldModel,
}

/// Shared loop state.
struct Runner<'a> {
    f: &'a Objective,
    cfg: &'a OptimizerConfig,
    rng: &'a RngStream,
    x: DenseVector,
    trace: RunTrace,
    evals: u64,
    start: Instant,
}

impl<'a> Runner<'a> {
    fn new(f: &'a Objective, x0: &DenseVector, cfg: &'a OptimizerConfig, rng: &'a RngStream) -> RunResult<Self> {
        let fail = |error| RunError {
            error,
            trace: RunTrace::default(),
        };
        cfg.validate().map_err(fail)?;
        if x0.dim() != f.dim() {
            return Err(fail(Error::DimensionMismatch {
                expected: f.dim(),
                actual: x0.dim(),
            }));
        }
        let mut r = Runner {
            f,
            cfg,
            rng,
            x: x0.clone(),
            trace: RunTrace::default(),
            evals: 0,
            start: Instant::now(),
        };
        let f0 = r.monitor(0)?;
        r.trace.rows.push(TraceRow {
            iter: 0,
            evals: 0,
            f: f0,
            grad_norm: None,
            learner_loss: None,
            proj_residual: None,
            wall_ms: r.wall(),
        });
        Ok(r)
    }

    fn fail(&mut self, error: Error) -> RunError {
        self.trace.stop_reason = StopReason::Error;
        RunError {
            error,
            trace: std::mem::take(&mut self.trace),
        }
    }

    fn wall(&self) -> Option<f64> {
        self.cfg
            .record_wall_time
            .then(|| self.start.elapsed().as_secs_f64() * 1e3)
    }

    fn monitor(&mut self, t: u64) -> RunResult<f64> {
        let seed = self.rng.derive(purpose::MONITOR).seed_u64(t);
        let v = self.f.eval(self.x.as_slice(), seed);
        self.trace.probe_evals += 1;
        if !v.is_finite() {
            let point = self.x.to_vec();
            return Err(self.fail(Error::NonFiniteObjective { point, value: v }));
        }
        Ok(v)
    }

    fn iteration_stream(&self, t: u64) -> RngStream {
        self.rng.derive(purpose::ITERATION).derive(t)
    }

    fn can_afford(&self, per_iter: u64) -> bool {
        self.evals + per_iter <= self.cfg.max_evals
    }

    /// Applies the step and logs the row. Returns `true` when the loop should stop.
    fn step(
        &mut self,
        t: u64,
        g: &DenseVector,
        alpha: f64,
        spent: u64,
        learner_loss: Option<f64>,
        residual_basis: Option<&DenseMatrix>,
    ) -> RunResult<bool> {
        self.x.axpy(-alpha, g).expect("dimension checked");
        self.evals += spent;
        let f = self.monitor(t)?;
        let proj_residual = match (self.cfg.metrics_every, residual_basis) {
            (Some(every), Some(q)) if t % every == 0 => {
                let stream = self.iteration_stream(t).derive(purpose::PROBE);
                let r = projection_residual(self.f, &self.x, q, self.cfg.probe_k, self.cfg.delta, &stream);
                self.trace.probe_evals += 2 * self.cfg.probe_k as u64;
                Some(r.map_err(|e| self.fail(e))?)
            }
            _ => None,
        };
        self.trace.rows.push(TraceRow {
            iter: t,
            evals: self.evals,
            f,
            grad_norm: Some(g.norm()),
            learner_loss,
            proj_residual,
            wall_ms: self.wall(),
        });
        let stationary = self
            .cfg
            .stop_window
            .is_some_and(|w| stationarity_check(&self.trace.rows, w, self.cfg.stop_grad_tol));
        if stationary {
            self.trace.stop_reason = StopReason::Stationary;
        }
        Ok(stationary)
    }

    fn finish(self) -> (DenseVector, RunTrace) {
        (self.x, self.trace)
    }
}

/// Optional top-`b` filtering; returns the gradient and the kept `y` values.
fn filtered(est: &GradientEstimate, top_b: Option<usize>) -> (DenseVector, Vec<f64>) {
    match top_b {
        Some(b) if b < est.k() => {
            let mut idx: Vec<usize> = (0..est.k()).collect();
            // Stable order on ties keeps the choice deterministic.
            idx.sort_by(|&i, &j| est.y_values[j].abs().total_cmp(&est.y_values[i].abs()).then(i.cmp(&j)));
            idx.truncate(b);
            idx.sort_unstable();
            let ys = idx.iter().map(|&i| est.y_values[i]).collect();
            (est.recombine(&idx), ys)
        }
        _ => (est.g.clone(), est.y_values.clone()),
    }
}

fn step_size(cfg: &OptimizerConfig, kept_y: &[f64]) -> f64 {
    if !cfg.step_std_scaling || kept_y.len() < 2 {
        return cfg.alpha;
    }
    let n = kept_y.len() as f64;
    let mean = kept_y.iter().sum::<f64>() / n;
    let sd = (kept_y.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        cfg.alpha / sd
    } else {
        cfg.alpha
    }
}

/// Random search: `xᵗ⁺¹ = xᵗ − α·grad_est(xᵗ)` with `k_e` full-sphere directions.
pub fn random_search(
    f: &Objective,
    x0: &DenseVector,
    cfg: &OptimizerConfig,
    rng: &RngStream,
) -> RunResult<(DenseVector, RunTrace)> {
    if cfg.k_e == 0 {
        return Err(RunError {
            error: Error::Config("random search needs k_e ≥ 1".into()),
            trace: RunTrace::default(),
        });
    }
    let mut run = Runner::new(f, x0, cfg, rng)?;
    let per_iter = 2 * cfg.k_e as u64;
    let mut t = 0;
    while run.can_afford(per_iter) {
        t += 1;
        let stream = run.iteration_stream(t).derive(purpose::EXPLORATION);
        let est = grad_est_with(f, &run.x, cfg.delta, cfg.k_e, &stream, cfg.aggregation).map_err(|e| run.fail(e))?;
        let (g, ys) = filtered(&est, cfg.top_b);
        if run.step(t, &g, step_size(cfg, &ys), est.evals_used, None, None)? {
            break;
        }
    }
    Ok(run.finish())
}

/// Manifold random search: `k_m` directions in the span of the oracle
/// Jacobian's rows at every iterate.
pub fn manifold_random_search(
    f: &Objective,
    x0: &DenseVector,
    oracle_jacobian: &JacobianOracle<'_>,
    cfg: &OptimizerConfig,
    rng: &RngStream,
) -> RunResult<(DenseVector, RunTrace)> {
    if cfg.k_m == 0 {
        return Err(RunError {
            error: Error::Config("manifold random search needs k_m ≥ 1".into()),
            trace: RunTrace::default(),
        });
    }
    let mut run = Runner::new(f, x0, cfg, rng)?;
    let per_iter = 2 * cfg.k_m as u64;
    let mut t = 0;
    while run.can_afford(per_iter) {
        t += 1;
        let jac = oracle_jacobian(run.x.as_slice()).map_err(|e| run.fail(e))?;
        let stream = run.iteration_stream(t).derive(purpose::MANIFOLD);
        let est = manifold_grad_est_with(f, &run.x, &jac, cfg.delta, cfg.k_m, &stream, cfg.aggregation)
            .map_err(|e| run.fail(e))?;
        if est.fallback {
            run.trace.fallback_iterations += 1;
        }
        let (g, ys) = filtered(&est, cfg.top_b);
        let alpha = step_size(cfg, &ys);
        // The residual is probed after the step, so take the basis there.
        let probe_basis = match cfg.metrics_every {
            Some(every) if t % every == 0 => {
                let mut next = run.x.clone();
                next.axpy(-alpha, &g).expect("conforming");
                let jac = oracle_jacobian(next.as_slice()).map_err(|e| run.fail(e))?;
                Some(gram_schmidt(&jac.transpose()).q)
            }
            _ => None,
        };
        if run.step(t, &g, alpha, est.evals_used, None, probe_basis.as_ref())? {
            break;
        }
    }
    Ok(run.finish())
}

/// Learner model shapes for a `d`-dimensional problem with latent size `n`.
pub fn default_model_specs(d: usize, n: usize) -> Result<(MlpSpec, MlpSpec)> {
    Ok((MlpSpec::encoder(d, n)?, MlpSpec::head(n)?))
}

/// Learned manifold random search.
///
/// Each iteration mixes a `k_e`-direction full-space estimate with a
/// `k_m`-direction estimate in the tangent span of the learned encoder, steps,
/// feeds the probes to the replay buffer and runs one FTRL round. Every
/// `full_resolve_period`-th iteration the model is refitted from scratch; a
/// mixed gradient norm below `reinit_threshold` reinitializes it.
pub fn lmrs(
    f: &Objective,
    x0: &DenseVector,
    cfg: &OptimizerConfig,
    lcfg: &LearnerConfig,
    latent_dim: usize,
    rng: &RngStream,
) -> RunResult<LmrsOutcome> {
    let early = |error| RunError {
        error,
        trace: RunTrace::default(),
    };
    if cfg.k_e == 0 || cfg.k_m == 0 {
        return Err(early(Error::Config("LMRS needs k_e ≥ 1 and k_m ≥ 1".into())));
    }
    lcfg.validate().map_err(early)?;
    if latent_dim == 0 || latent_dim > f.dim() {
        return Err(early(Error::Config(format!(
            "latent dimension must lie in 1..={}, got {latent_dim}",
            f.dim()
        ))));
    }
    let d = f.dim();
    let beta = cfg.beta.resolve(d);
    let (we, wm) = mixing_weights(beta, cfg.k_e, cfg.k_m).map_err(early)?;
    let (enc, head) = default_model_specs(d, latent_dim).map_err(early)?;
    let model = ManifoldModel::init_standard_normal(enc, head, rng).map_err(early)?;
    let mut state = LearnerState::new(model);
    let mut buffer = ReplayBuffer::new(lcfg.buffer_capacity).map_err(early)?;

    let mut run = Runner::new(f, x0, cfg, rng)?;
    let per_iter = 2 * (cfg.k_e + cfg.k_m) as u64;
    let mut t = 0;
    while run.can_afford(per_iter) {
        t += 1;
        let it = run.iteration_stream(t);
        let x_t = run.x.clone();
        let ge = grad_est_with(f, &x_t, cfg.delta, cfg.k_e, &it.derive(purpose::EXPLORATION), cfg.aggregation)
            .map_err(|e| run.fail(e))?;
        let jac = match state.model.input_jacobian(x_t.as_slice()) {
            Ok(j) => j,
            Err(_) => {
                run.trace.learner_failures += 1;
                DenseMatrix::zeros(latent_dim, d)
            }
        };
        let gm = manifold_grad_est_with(f, &x_t, &jac, cfg.delta, cfg.k_m, &it.derive(purpose::MANIFOLD), cfg.aggregation)
            .map_err(|e| run.fail(e))?;
        if gm.fallback {
            run.trace.fallback_iterations += 1;
        }
        let (ge_g, mut ys) = filtered(&ge, cfg.top_b);
        let (gm_g, ys_m) = filtered(&gm, cfg.top_b);
        ys.extend(ys_m);
        let g = DenseVector::new(ge_g.iter().zip(gm_g.iter()).map(|(a, b)| we * a + wm * b).collect())
            .map_err(|e| run.fail(e))?;
        let alpha = step_size(cfg, &ys);

        let mut records = ge.records(&x_t, t);
        if !lcfg.exploration_only {
            records.extend(gm.records(&x_t, t));
        }
        buffer.extend(records).expect("records are in iteration order");

        let learner_stream = it.derive(purpose::LEARNER);
        let mut report = match learner::ftrl_step(&mut state, &buffer, lcfg, &x_t, &learner_stream) {
            Ok(r) => r,
            Err(_) => {
                run.trace.learner_failures += 1;
                Default::default()
            }
        };
        if t % lcfg.full_resolve_period == 0 {
            match learner::full_resolve(&mut state, &buffer, lcfg, &x_t, &learner_stream) {
                Ok(r) => {
                    report.loss_after = r.loss_after;
                    report.resolved = r.resolved;
                    report.reinitialized |= r.reinitialized;
                }
                Err(_) => run.trace.learner_failures += 1,
            }
        }
        let reinit = learner::maybe_reinit(&mut state, g.norm(), lcfg, &learner_stream).unwrap_or(false);
        run.trace.learner_rows.push(LearnerRow::from_report(t, &report, reinit));

        let probe_basis = match cfg.metrics_every {
            Some(every) if t % every == 0 => {
                let mut next = x_t.clone();
                next.axpy(-alpha, &g).expect("conforming");
                match state.model.input_jacobian(next.as_slice()) {
                    Ok(j) => Some(gram_schmidt(&j.transpose()).q),
                    Err(_) => Some(DenseMatrix::zeros(d, 0)),
                }
            }
            _ => None,
        };
        let learner_loss = report.loss_after.is_finite().then_some(report.loss_after);
        if run.step(t, &g, alpha, per_iter, learner_loss, probe_basis.as_ref())? {
            break;
        }
    }
    let (x_final, trace) = run.finish();
    Ok(LmrsOutcome {
        x_final,
        trace,
        model: state.model,
    })
}

#[cfg(test)]
mod tests;
