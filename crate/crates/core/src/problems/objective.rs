use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub type EvalFn = dyn Fn(&[f64], u64) -> f64 + Send + Sync;

/// Enough information to rebuild an objective exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub name: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sigma: f64,
}

impl ProblemDescriptor {
    pub fn benchmark(name: &str, dim: usize) -> Self {
        ProblemDescriptor {
            name: name.to_string(),
            dim,
            n: None,
            seed: None,
            sigma: 0.0,
        }
    }

    /// Short filesystem-safe label, e.g. `synthetic-d100-n2-s7`.
    pub fn label(&self) -> String {
        let mut s = format!("{}-d{}", self.name, self.dim);
        if let Some(n) = self.n {
            s.push_str(&format!("-n{n}"));
        }
        if let Some(seed) = self.seed {
            s.push_str(&format!("-s{seed}"));
        }
        if self.sigma != 0.0 {
            s.push_str(&format!("-sigma{}", self.sigma));
        }
        s
    }
}

/// Known global minimizer of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMinimum {
    pub value: f64,
    pub location: Vec<f64>,
}

/// A stochastic black box `F(x, ξ)` with an evaluation counter.
///
/// The noise variable is addressed by a 64-bit seed, so `eval` is a pure
/// function of `(x, seed)`. The counter is atomic and counts every call.
pub struct Objective {
    dim: usize,
    func: Arc<EvalFn>,
    counter: AtomicU64,
    descriptor: ProblemDescriptor,
    minimum: Option<GlobalMinimum>,
}

impl Objective {
    pub fn new(
        dim: usize,
        descriptor: ProblemDescriptor,
        func: impl Fn(&[f64], u64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Objective {
            dim,
            func: Arc::new(func),
            counter: AtomicU64::new(0),
            descriptor,
            minimum: None,
        }
    }

    pub fn with_minimum(mut self, minimum: GlobalMinimum) -> Self {
        self.minimum = Some(minimum);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn descriptor(&self) -> &ProblemDescriptor {
        &self.descriptor
    }

    pub fn global_minimum(&self) -> Option<&GlobalMinimum> {
        self.minimum.as_ref()
    }

    /// Evaluates `F(x, seed)` and counts the call.
    pub fn eval(&self, x: &[f64], noise_seed: u64) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.counter.fetch_add(1, Ordering::Relaxed);
        (self.func)(x, noise_seed)
    }

    /// Total number of `eval` calls so far.
    pub fn evaluations(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }

    pub(crate) fn shared_fn(&self) -> Arc<EvalFn> {
        Arc::clone(&self.func)
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("descriptor", &self.descriptor)
            .field("evaluations", &self.evaluations())
            .finish()
    }
}
