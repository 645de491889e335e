//! Derivative-free optimization by random search, with tangent-space search
//! over a known manifold and joint online learning of an unknown one.
//!
//! Modules, bottom-up:
//!
//! * [`linalg`]: dense vectors and matrices, Gram–Schmidt, sphere sampling, seeded streams.
//! * [`problems`]: the [`Objective`](problems::Objective) type, benchmarks, the
//!   synthetic manifold problem and a noise wrapper.
//! * [`estimators`]: antithetic zeroth-order gradient estimators.
//! * [`netdiff`]: the encoder/head MLP and its derivatives.
//! * [`learner`]: replay buffer, one-step loss, regularizer and the FTRL solver.
//! * [`optimizers`]: random search, manifold random search and LMRS.
//! * [`metrics`]: projection residual, performance profiles, evals-to-threshold.
//! * [`harness`]: experiment configs, sweeps and the file layout used by the CLI.

pub mod error;
pub mod harness;
pub mod estimators;
pub mod learner;
pub mod linalg;
pub mod metrics;
pub mod netdiff;
pub mod optimizers;
pub mod problems;

pub use error::{Error, Result};

/// The book's snippets, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/estimators.md")]
    struct Estimators;
    #[doc = include_str!("../../../book/src/manifold.md")]
    struct Manifold;
    #[doc = include_str!("../../../book/src/learning.md")]
    struct Learning;
    #[doc = include_str!("../../../book/src/problems.md")]
    struct Problems;
    #[doc = include_str!("../../../book/src/profiles.md")]
    struct Profiles;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
