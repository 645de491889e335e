//! Experiment configs, sweeps, output layout and the analyses behind the CLI.
//!
//! A config expands into one run per (grid point × seed). Each run is written
//! under `output_dir/<method>/<problem label>/<hash>/`, where the hash is the
//! first 16 hex digits of the SHA-256 of the run's canonical resolved config:
//!
//! ```text
//! trace.csv        iter,evals,f,grad_norm,learner_loss,proj_residual,wall_ms
//! learner.csv      LMRS only
//! config.json      resolved RunConfig
//! summary.json     RunSummary
//! final.json       {"x_final": [...]} (null after a failed run)
//! checkpoint.json  LMRS only
//! ```

mod analysis;
mod config;
mod run;

pub use analysis::{
    collect_runs, median, profile_dirs, solve_tables, sweep_select, write_sweep_select, SelectCriterion, SelectReport,
    Selection, StoredRun, TauGrid,
};
pub use config::{canonical_json, short_hash, ExperimentConfig, Method, RunConfig, SweepGrids};
pub use run::{
    build_problem, execute, run_experiment, start_point, thread_count, write_atomic, ExperimentReport, RunOutput,
    RunSummary, THREADS_ENV,
};
