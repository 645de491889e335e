use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{validate_problem, ExperimentConfig, Method, RunConfig};
use crate::error::{Error, Result};
use crate::linalg::{purpose, standard_normal_vec, DenseVector, RngStream};
use crate::netdiff::checkpoint_to_json;
use crate::optimizers::{lmrs, manifold_random_search, random_search, RunTrace, StopReason};
use crate::problems::{make_benchmark, make_synthetic, with_noise, Objective, ProblemDescriptor, SyntheticManifoldProblem};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "MANIFOLD_DFO_THREADS";

/// Per-run `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub problem: String,
    pub seed: u64,
    pub run_hash: String,
    pub grid_hash: String,
    pub initial_f: f64,
    pub final_f: f64,
    pub best_f: f64,
    pub iterations: u64,
    /// Evaluations charged to the budget (the trace's last `evals`).
    pub evals: u64,
    /// Monitoring and residual-probe evaluations, outside the budget.
    pub probe_evals: u64,
    /// Every call the objective saw.
    pub objective_evals: u64,
    pub fallback_iterations: u64,
    pub learner_failures: u64,
    pub stop_reason: StopReason,
    /// Budget spent when the stationarity rule fired; `None` if it never did.
    pub evals_to_solve: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Rebuilds the objective a descriptor names; synthetic problems also return
/// their planted model.
pub fn build_problem(desc: &ProblemDescriptor) -> Result<(Objective, Option<Arc<SyntheticManifoldProblem>>)> {
    validate_problem(desc)?;
    let (base, planted) = if desc.name == "synthetic" {
        let n = desc.n.expect("validated");
        let seed = desc.seed.expect("validated");
        let (f, p) = make_synthetic(desc.dim, n, &RngStream::new(seed))?;
        (f, Some(p))
    } else {
        (make_benchmark(&desc.name, desc.dim)?, None)
    };
    let f = if desc.sigma > 0.0 {
        with_noise(base, desc.sigma)?
    } else {
        base
    };
    Ok((f, planted))
}

/// Default start point: i.i.d. standard normal from the run seed.
pub fn start_point(dim: usize, seed: u64) -> DenseVector {
    DenseVector::from_raw(standard_normal_vec(dim, &RngStream::new(seed).derive(purpose::START_POINT)))
}

/// Output of one run, before anything is written.
pub struct RunOutput {
    pub config: RunConfig,
    pub trace: RunTrace,
    pub x_final: Option<DenseVector>,
    pub checkpoint: Option<String>,
    pub summary: RunSummary,
}

pub fn execute(run: &RunConfig) -> Result<RunOutput> {
    let (f, planted) = build_problem(&run.problem)?;
    let x0 = start_point(f.dim(), run.seed);
    let rng = RngStream::new(run.seed);
    let opt = &run.optimizer;
    let (outcome, checkpoint) = match run.method {
        Method::Rs => (random_search(&f, &x0, opt, &rng), None),
        Method::Mrs => {
            let p = planted.ok_or_else(|| Error::Config("mrs needs the synthetic problem".into()))?;
            let oracle = move |x: &[f64]| p.encoder_jacobian(x);
            (manifold_random_search(&f, &x0, &oracle, opt, &rng), None)
        }
        Method::Lmrs => match lmrs(&f, &x0, opt, &run.learner, run.latent_dim, &rng) {
            Ok(o) => {
                let ck = checkpoint_to_json(&o.model, &rng)?;
                (Ok((o.x_final, o.trace)), Some(ck))
            }
            Err(e) => (Err(e), None),
        },
    };
    let (x_final, trace, error) = match outcome {
        Ok((x, t)) => (Some(x), t, None),
        Err(e) => (None, e.trace, Some(e.error.to_string())),
    };
    let summary = summarize(run, &trace, f.evaluations(), error)?;
    Ok(RunOutput {
        config: run.clone(),
        trace,
        x_final,
        checkpoint,
        summary,
    })
}

fn summarize(run: &RunConfig, trace: &RunTrace, objective_evals: u64, error: Option<String>) -> Result<RunSummary> {
    let f_of = |r: Option<&crate::optimizers::TraceRow>| r.map_or(f64::NAN, |r| r.f);
    let best_f = trace.rows.iter().map(|r| r.f).fold(f64::INFINITY, f64::min);
    Ok(RunSummary {
        method: run.method,
        problem: run.problem.label(),
        seed: run.seed,
        run_hash: run.hash()?,
        grid_hash: run.grid_hash()?,
        initial_f: f_of(trace.rows.first()),
        final_f: f_of(trace.last()),
        best_f: if trace.rows.is_empty() { f64::NAN } else { best_f },
        iterations: trace.iterations(),
        evals: trace.evals(),
        probe_evals: trace.probe_evals,
        objective_evals,
        fallback_iterations: trace.fallback_iterations,
        learner_failures: trace.learner_failures,
        stop_reason: trace.stop_reason,
        evals_to_solve: (trace.stop_reason == StopReason::Stationary).then(|| trace.evals()),
        error,
    })
}

/// Write to a sibling temp file, then rename over the target.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

impl RunOutput {
    /// Writes `trace.csv`, `config.json`, `summary.json`, `final.json` and,
    /// for LMRS, `learner.csv` and `checkpoint.json`.
    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let dir = self.config.run_dir(root)?;
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_atomic(&dir.join("trace.csv"), &self.trace.to_csv())?;
        write_atomic(&dir.join("config.json"), &pretty(&self.config)?)?;
        write_atomic(&dir.join("summary.json"), &pretty(&self.summary)?)?;
        let x = self.x_final.as_ref().map(|x| x.as_slice().to_vec());
        write_atomic(&dir.join("final.json"), &pretty(&serde_json::json!({ "x_final": x }))?)?;
        if self.config.method == Method::Lmrs {
            write_atomic(&dir.join("learner.csv"), &self.trace.learner_csv())?;
        }
        if let Some(ck) = &self.checkpoint {
            write_atomic(&dir.join("checkpoint.json"), ck)?;
        }
        Ok(dir)
    }
}

/// Worker count: `MANIFOLD_DFO_THREADS` if set, else the machine's parallelism.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Result of `run`: the run directories written, and how many runs failed.
#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub run_dirs: Vec<PathBuf>,
    pub failed: Vec<(PathBuf, String)>,
}

/// Validates, then executes every (grid point × seed) run on a worker pool and
/// writes its outputs. Config errors surface before anything touches the disk.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    let runs = cfg.expand()?;
    let root = &cfg.output_dir;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    let results: Vec<Result<(PathBuf, Option<String>)>> = pool.install(|| {
        runs.par_iter()
            .map(|run| {
                let out = execute(run)?;
                let dir = out.write(root)?;
                Ok((dir, out.summary.error))
            })
            .collect()
    });
    let mut report = ExperimentReport::default();
    for r in results {
        let (dir, err) = r?;
        if let Some(e) = err {
            report.failed.push((dir.clone(), e));
        }
        report.run_dirs.push(dir);
    }
    Ok(report)
}
