use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::learner::StepReport;

pub const TRACE_HEADER: &str = "iter,evals,f,grad_norm,learner_loss,proj_residual,wall_ms";
pub const LEARNER_HEADER: &str = "iteration,buffer_size,mean_loss_before,mean_loss_after,reinit_flag,resolve_flag";

/// One trace row. Row 0 is the starting point, before any evaluation is spent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: u64,
    /// Cumulative optimization evaluations (probe evaluations excluded).
    pub evals: u64,
    pub f: f64,
    pub grad_norm: Option<f64>,
    pub learner_loss: Option<f64>,
    pub proj_residual: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerRow {
    pub iteration: u64,
    pub buffer_size: usize,
    pub mean_loss_before: f64,
    pub mean_loss_after: f64,
    pub reinit_flag: bool,
    pub resolve_flag: bool,
}

impl LearnerRow {
    pub fn from_report(iteration: u64, r: &StepReport, reinit: bool) -> Self {
        LearnerRow {
            iteration,
            buffer_size: r.buffer_size,
            mean_loss_before: r.loss_before,
            mean_loss_after: r.loss_after,
            reinit_flag: reinit || r.reinitialized,
            resolve_flag: r.resolved,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    #[default]
    Budget,
    Stationary,
    Error,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub learner_rows: Vec<LearnerRow>,
    /// Evaluations spent on monitoring `f` and on residual probes.
    pub probe_evals: u64,
    /// Iterations whose manifold estimate fell back to full-space sampling.
    pub fallback_iterations: u64,
    /// Iterations where the learner failed and the step degraded to random search.
    pub learner_failures: u64,
    pub stop_reason: StopReason,
}

impl RunTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn evals(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.evals)
    }

    pub fn iterations(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.iter)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter,
                r.evals,
                r.f,
                opt(r.grad_norm),
                opt(r.learner_loss),
                opt(r.proj_residual),
                opt(r.wall_ms)
            );
        }
        out
    }

    pub fn learner_csv(&self) -> String {
        let mut out = String::from(LEARNER_HEADER);
        out.push('\n');
        for r in &self.learner_rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration,
                r.buffer_size,
                r.mean_loss_before,
                r.mean_loss_after,
                r.reinit_flag as u8,
                r.resolve_flag as u8
            );
        }
        out
    }

    /// Parses the format written by [`RunTrace::to_csv`]. Only `rows` is restored.
    pub fn from_csv(text: &str) -> crate::Result<RunTrace> {
        use crate::Error;
        let mut lines = text.lines();
        if lines.next() != Some(TRACE_HEADER) {
            return Err(Error::invalid("trace CSV header mismatch"));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(Error::invalid(format!("trace CSV line {}: expected 7 cells", n + 2)));
            }
            let num = |s: &str| -> crate::Result<f64> {
                s.parse()
                    .map_err(|_| Error::invalid(format!("trace CSV line {}: bad number '{s}'", n + 2)))
            };
            let optn = |s: &str| -> crate::Result<Option<f64>> {
                if s.is_empty() { Ok(None) } else { num(s).map(Some) }
            };
            let int = |s: &str| -> crate::Result<u64> {
                s.parse()
                    .map_err(|_| Error::invalid(format!("trace CSV line {}: bad integer '{s}'", n + 2)))
            };
            rows.push(TraceRow {
                iter: int(cells[0])?,
                evals: int(cells[1])?,
                f: num(cells[2])?,
                grad_norm: optn(cells[3])?,
                learner_loss: optn(cells[4])?,
                proj_residual: optn(cells[5])?,
                wall_ms: optn(cells[6])?,
            });
        }
        Ok(RunTrace {
            rows,
            ..Default::default()
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Relative decrease below which a window counts as a plateau.
pub const PLATEAU_TOL: f64 = 1e-8;

/// Stationarity over the last `window` rows: median gradient-norm estimate
/// below `grad_tol`, or relative decrease of `f` across the window below
/// [`PLATEAU_TOL`]. Returns `false` while fewer than `window` rows carry a
/// gradient norm.
pub fn stationarity_check(rows: &[TraceRow], window: usize, grad_tol: f64) -> bool {
    let with_grad: Vec<&TraceRow> = rows.iter().filter(|r| r.grad_norm.is_some()).collect();
    if window == 0 || with_grad.len() < window {
        return false;
    }
    let win = &with_grad[with_grad.len() - window..];
    let mut norms: Vec<f64> = win.iter().map(|r| r.grad_norm.unwrap()).collect();
    norms.sort_by(f64::total_cmp);
    let median = if window % 2 == 1 {
        norms[window / 2]
    } else {
        0.5 * (norms[window / 2 - 1] + norms[window / 2])
    };
    if median < grad_tol {
        return true;
    }
    let (first, last) = (win[0].f, win[window - 1].f);
    let scale = first.abs().max(f64::MIN_POSITIVE);
    (first - last) / scale < PLATEAU_TOL
}
