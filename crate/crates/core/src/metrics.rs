//! Analysis over completed runs: projection residual of the probe-estimated
//! gradient, performance profiles and threshold crossings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::grad_est;
use crate::linalg::{DenseMatrix, DenseVector, RngStream};
use crate::optimizers::RunTrace;
use crate::problems::Objective;

/// Directions used by default for the residual probe.
pub const DEFAULT_PROBE_K: usize = 2000;

/// `‖ĝ − J_q J_qᵀ ĝ‖₂` with `ĝ` a `probe_k`-direction estimate at `x` and
/// `jacobian_q` a `d × r` matrix with orthonormal columns. Spends `2·probe_k`
/// evaluations of `f`, which callers must keep out of the optimization budget.
pub fn projection_residual(
    f: &Objective,
    x: &DenseVector,
    jacobian_q: &DenseMatrix,
    probe_k: usize,
    delta: f64,
    rng: &RngStream,
) -> Result<f64> {
    if jacobian_q.rows() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            actual: jacobian_q.rows(),
        });
    }
    let g = grad_est(f, x, delta, probe_k, rng)?.g;
    Ok(residual_of(&g, jacobian_q))
}

/// Residual of `g` after projecting onto the column span of `q`.
pub fn residual_of(g: &DenseVector, q: &DenseMatrix) -> f64 {
    let coeffs = q.mat_t_vec(g).expect("conforming");
    let proj = q.matvec(&coeffs).expect("conforming");
    g.iter().zip(proj.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

/// Cumulative evaluations at the first trace row whose `f` reaches the
/// threshold; `None` if no row does.
pub fn evals_to_threshold(trace: &RunTrace, threshold: f64, direction: Direction) -> Option<u64> {
    trace
        .rows
        .iter()
        .find(|r| match direction {
            Direction::Minimize => r.f <= threshold,
            Direction::Maximize => r.f >= threshold,
        })
        .map(|r| r.evals)
}

/// Evaluations to solve: `None` is unsolved.
pub type SolveTable = BTreeMap<String, Option<u64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub methods: Vec<String>,
    pub problems: Vec<String>,
    pub tau_grid: Vec<f64>,
    /// `fractions[m][j]` is method `m`'s profile at `tau_grid[j]`.
    pub fractions: Vec<Vec<f64>>,
    pub evals_to_solve: BTreeMap<String, SolveTable>,
}

impl ProfileTable {
    pub fn profile(&self, method: &str) -> Option<&[f64]> {
        let i = self.methods.iter().position(|m| m == method)?;
        Some(&self.fractions[i])
    }

    /// `method,tau,fraction` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,tau,fraction\n");
        for (m, row) in self.methods.iter().zip(&self.fractions) {
            for (tau, frac) in self.tau_grid.iter().zip(row) {
                out.push_str(&format!("{m},{tau},{frac}\n"));
            }
        }
        out
    }
}

fn shared_problems(tables: &BTreeMap<String, SolveTable>) -> Result<Vec<String>> {
    let mut iter = tables.iter();
    let (first_name, first) = iter
        .next()
        .ok_or_else(|| Error::invalid("no methods to profile"))?;
    for (name, t) in iter {
        if t.keys().ne(first.keys()) {
            let only_a: Vec<_> = first.keys().filter(|k| !t.contains_key(*k)).collect();
            let only_b: Vec<_> = t.keys().filter(|k| !first.contains_key(*k)).collect();
            return Err(Error::invalid(format!(
                "problem sets differ: only in '{first_name}': {only_a:?}; only in '{name}': {only_b:?}"
            )));
        }
    }
    if first.is_empty() {
        return Err(Error::invalid("empty problem set"));
    }
    Ok(first.keys().cloned().collect())
}

/// Gap `T_m(p) − min_m' T_m'(p)` per method and problem; `None` when method
/// `m` did not solve `p`.
fn gaps(tables: &BTreeMap<String, SolveTable>, problems: &[String]) -> Vec<Vec<Option<f64>>> {
    let best: Vec<Option<u64>> = problems
        .iter()
        .map(|p| tables.values().filter_map(|t| t[p]).min())
        .collect();
    tables
        .values()
        .map(|t| {
            problems
                .iter()
                .zip(&best)
                .map(|(p, b)| match (t[p], b) {
                    (Some(v), Some(b)) => Some((v - b) as f64),
                    _ => None,
                })
                .collect()
        })
        .collect()
}

/// Fraction of problems on which each method's evaluations-to-solve is within
/// `τ` of the best method's. Unsolved counts as `+∞` and is never within `τ`.
pub fn performance_profile(tables: &BTreeMap<String, SolveTable>, tau_grid: &[f64]) -> Result<ProfileTable> {
    let problems = shared_problems(tables)?;
    if tau_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("τ values must be non-negative"));
    }
    let np = problems.len() as f64;
    let fractions = gaps(tables, &problems)
        .into_iter()
        .map(|row| {
            tau_grid
                .iter()
                .map(|&tau| row.iter().filter(|g| matches!(g, Some(g) if *g <= tau)).count() as f64 / np)
                .collect()
        })
        .collect();
    Ok(ProfileTable {
        methods: tables.keys().cloned().collect(),
        problems,
        tau_grid: tau_grid.to_vec(),
        fractions,
        evals_to_solve: tables.clone(),
    })
}

/// 50 log-spaced points from 1 to the largest finite gap (just `[1]` when no
/// gap exceeds 1).
pub fn default_tau_grid(tables: &BTreeMap<String, SolveTable>) -> Result<Vec<f64>> {
    let problems = shared_problems(tables)?;
    let max_gap = gaps(tables, &problems)
        .into_iter()
        .flatten()
        .flatten()
        .fold(0.0, f64::max);
    Ok(log_grid(1.0, max_gap, 50))
}

/// `n` log-spaced points from `a` to `b` inclusive; degenerate ranges give `[a]`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 || b <= a {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
