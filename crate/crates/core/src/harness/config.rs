use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::optimizers::OptimizerConfig;
use crate::problems::{ProblemDescriptor, BENCHMARK_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rs,
    Mrs,
    Lmrs,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rs => "rs",
            Method::Mrs => "mrs",
            Method::Lmrs => "lmrs",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optional grids. Every combination of the listed values is one grid point;
/// an absent list keeps the base config's value. `k` sets both `k_e` and `k_m`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrids {
    pub delta: Option<Vec<f64>>,
    pub k: Option<Vec<usize>>,
    pub alpha: Option<Vec<f64>>,
    pub learning_rate: Option<Vec<f64>>,
}

/// The JSON file passed to `run --config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub problem: ProblemDescriptor,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sweep: SweepGrids,
    pub output_dir: PathBuf,
    /// Overrides `optimizer.metrics_every` when present.
    #[serde(default)]
    pub metrics_every: Option<u64>,
    /// Learner latent size. Defaults to `k_m` of each grid point.
    #[serde(default)]
    pub latent_dim: Option<usize>,
}

/// One fully resolved run: what gets hashed and written as `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    pub method: Method,
    pub problem: ProblemDescriptor,
    pub optimizer: OptimizerConfig,
    /// Only meaningful for `lmrs`; kept for every method so the layout is uniform.
    pub learner: LearnerConfig,
    pub latent_dim: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn canonical_json(&self) -> Result<String> {
        canonical_json(self)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> Result<String> {
        Ok(short_hash(&self.canonical_json()?))
    }

    /// Hash of the grid point, i.e. the config with the seed blanked.
    pub fn grid_hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.seed = 0;
        c.hash()
    }

    pub fn run_dir(&self, root: &Path) -> Result<PathBuf> {
        Ok(root
            .join(self.method.as_str())
            .join(self.problem.label())
            .join(self.hash()?))
    }
}

/// JSON with object keys sorted, which `serde_json::Value` maps guarantee.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

pub fn short_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return cfg("seeds must list at least one seed".into());
        }
        validate_problem(&self.problem)?;
        if self.method == Method::Mrs && self.problem.name != "synthetic" {
            return cfg(format!(
                "mrs needs an oracle Jacobian, which only the synthetic problem provides (got {})",
                self.problem.name
            ));
        }
        let grids = &self.sweep;
        for (name, list) in [("delta", &grids.delta), ("alpha", &grids.alpha), ("learning_rate", &grids.learning_rate)] {
            if let Some(v) = list {
                if v.is_empty() {
                    return cfg(format!("sweep.{name} is empty"));
                }
            }
        }
        if let Some(k) = &grids.k {
            if k.is_empty() {
                return cfg("sweep.k is empty".into());
            }
        }
        if self.latent_dim == Some(0) {
            return cfg("latent_dim must be positive".into());
        }
        for run in self.expand()? {
            run.optimizer.validate()?;
            run.learner.validate()?;
            if run.method == Method::Lmrs && run.latent_dim > run.problem.dim {
                return cfg(format!(
                    "latent_dim {} exceeds the problem dimension {}",
                    run.latent_dim, run.problem.dim
                ));
            }
        }
        Ok(())
    }

    /// All (grid point × seed) runs, grid-major, in a fixed order.
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        let mut base = self.optimizer.clone();
        if let Some(m) = self.metrics_every {
            base.metrics_every = Some(m);
        }
        let g = &self.sweep;
        let deltas = g.delta.clone().unwrap_or_else(|| vec![base.delta]);
        let ks: Vec<Option<usize>> = match &g.k {
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let alphas = g.alpha.clone().unwrap_or_else(|| vec![base.alpha]);
        let lrs = g
            .learning_rate
            .clone()
            .unwrap_or_else(|| vec![self.learner.learning_rate]);

        let mut out = Vec::new();
        for &delta in &deltas {
            for &k in &ks {
                for &alpha in &alphas {
                    for &lr in &lrs {
                        let mut opt = base.clone();
                        opt.delta = delta;
                        opt.alpha = alpha;
                        if let Some(k) = k {
                            opt.k_e = k;
                            opt.k_m = k;
                        }
                        let mut learner = self.learner.clone();
                        learner.learning_rate = lr;
                        let latent_dim = self.latent_dim.unwrap_or(opt.k_m);
                        for &seed in &self.seeds {
                            out.push(RunConfig {
                                version: env!("CARGO_PKG_VERSION").to_string(),
                                method: self.method,
                                problem: self.problem.clone(),
                                optimizer: opt.clone(),
                                learner: learner.clone(),
                                latent_dim,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn validate_problem(p: &ProblemDescriptor) -> Result<()> {
    let cfg = |m: String| Err(Error::Config(m));
    if p.dim == 0 {
        return cfg("problem.dim must be positive".into());
    }
    if !(p.sigma >= 0.0) || !p.sigma.is_finite() {
        return cfg(format!("problem.sigma must be a finite non-negative number, got {}", p.sigma));
    }
    if p.name == "synthetic" {
        match p.n {
            Some(n) if n >= 1 && n <= p.dim => {}
            _ => return cfg(format!("synthetic problem needs 1 ≤ n ≤ dim, got n={:?}", p.n)),
        }
        if p.seed.is_none() {
            return cfg("synthetic problem needs a seed".into());
        }
    } else if !BENCHMARK_NAMES.contains(&p.name.as_str()) {
        return cfg(format!(
            "unknown problem {:?}; supported: synthetic, {}",
            p.name,
            BENCHMARK_NAMES.join(", ")
        ));
    }
    Ok(())
}
