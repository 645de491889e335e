//! Objective functions: textbook benchmarks, the planted-manifold synthetic
//! family and a Gaussian noise wrapper.

mod benchmarks;
mod noise;
mod objective;
mod synthetic;

pub use benchmarks::{make_benchmark, BENCHMARK_NAMES};
pub use noise::with_noise;
pub use objective::{EvalFn, GlobalMinimum, Objective, ProblemDescriptor};
pub use synthetic::{
    make_synthetic, make_synthetic_with, project_psd, SyntheticManifoldProblem, SyntheticOptions,
    MIN_EIGENVALUE,
};
