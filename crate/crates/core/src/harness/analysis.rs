use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::config::{Method, RunConfig};
use super::run::{write_atomic, RunSummary};
use crate::error::{Error, Result};
use crate::metrics::{default_tau_grid, evals_to_threshold, log_grid, performance_profile, Direction, ProfileTable, SolveTable};
use crate::optimizers::RunTrace;

/// A run directory found on disk.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub dir: PathBuf,
    pub summary: RunSummary,
}

impl StoredRun {
    pub fn config(&self) -> Result<RunConfig> {
        read_json(&self.dir.join("config.json"))
    }

    pub fn trace(&self) -> Result<RunTrace> {
        let path = self.dir.join("trace.csv");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        RunTrace::from_csv(&text)
    }

    /// Evaluations to solve: first crossing of `threshold` if given, else the
    /// budget spent when the stationarity rule fired.
    pub fn evals_to_solve(&self, threshold: Option<f64>) -> Result<Option<u64>> {
        match threshold {
            Some(t) => Ok(evals_to_threshold(&self.trace()?, t, Direction::Minimize)),
            None => Ok(self.summary.evals_to_solve),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Every directory under `root` holding a `summary.json`, in path order.
pub fn collect_runs(root: &Path) -> Result<Vec<StoredRun>> {
    if !root.is_dir() {
        return Err(Error::invalid(format!("{} is not a directory", root.display())));
    }
    let mut runs = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::invalid(format!("cannot walk {}: {e}", root.display())))?;
        if entry.file_type().is_file() && entry.file_name() == "summary.json" {
            let dir = entry.path().parent().expect("file has a parent").to_path_buf();
            let summary = read_json(entry.path())?;
            runs.push(StoredRun { dir, summary });
        }
    }
    Ok(runs)
}

/// Median with `NaN` treated as `+∞`; the even case averages the middle pair.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v: Vec<f64> = values
        .iter()
        .map(|x| if x.is_nan() { f64::INFINITY } else { *x })
        .collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else if v[m - 1] == v[m] {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn evals_as_f64(e: Option<u64>) -> f64 {
    e.map_or(f64::INFINITY, |v| v as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectCriterion {
    MinFinalF,
    MinEvalsToThreshold,
}

impl std::str::FromStr for SelectCriterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_final_f" => Ok(SelectCriterion::MinFinalF),
            "min_evals_to_threshold" => Ok(SelectCriterion::MinEvalsToThreshold),
            other => Err(Error::Config(format!(
                "unknown criterion {other:?}; expected min_final_f or min_evals_to_threshold"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub method: Method,
    pub problem: String,
    pub grid_hash: String,
    /// Median of the criterion over seeds.
    pub score: f64,
    /// Median evaluations to solve, used for tie-breaking.
    pub median_evals_to_solve: f64,
    pub runs: Vec<String>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub criterion: SelectCriterion,
    pub threshold: Option<f64>,
    pub selections: Vec<Selection>,
}

/// Best grid point per method × problem under the median-over-seeds
/// criterion. Ties go to the smaller median evaluations to solve, then the
/// lexicographically smaller grid hash.
pub fn sweep_select(root: &Path, criterion: SelectCriterion, threshold: Option<f64>) -> Result<SelectReport> {
    let runs = collect_runs(root)?;
    if runs.is_empty() {
        return Err(Error::invalid(format!("no completed runs under {}", root.display())));
    }
    type Key = (Method, String);
    let mut groups: BTreeMap<Key, BTreeMap<String, Vec<&StoredRun>>> = BTreeMap::new();
    for r in &runs {
        groups
            .entry((r.summary.method, r.summary.problem.clone()))
            .or_default()
            .entry(r.summary.grid_hash.clone())
            .or_default()
            .push(r);
    }
    let mut selections = Vec::new();
    for ((method, problem), points) in groups {
        let mut best: Option<(f64, f64, String, Vec<&StoredRun>)> = None;
        for (hash, members) in points {
            let solve: Vec<f64> = members
                .iter()
                .map(|r| r.evals_to_solve(threshold).map(evals_as_f64))
                .collect::<Result<_>>()?;
            let solve_med = median(&solve);
            let score = match criterion {
                SelectCriterion::MinFinalF => median(&members.iter().map(|r| r.summary.final_f).collect::<Vec<_>>()),
                SelectCriterion::MinEvalsToThreshold => solve_med,
            };
            let better = match &best {
                None => true,
                Some((s, e, h, _)) => (score, solve_med, &hash) < (*s, *e, h),
            };
            if better {
                best = Some((score, solve_med, hash, members));
            }
        }
        let (score, solve_med, grid_hash, members) = best.expect("groups are non-empty");
        selections.push(Selection {
            method,
            problem,
            grid_hash,
            score,
            median_evals_to_solve: solve_med,
            runs: members.iter().map(|r| r.summary.run_hash.clone()).collect(),
            config: {
                let mut c = members[0].config()?;
                c.seed = 0;
                c
            },
        });
    }
    Ok(SelectReport {
        criterion,
        threshold,
        selections,
    })
}

/// Runs [`sweep_select`] and writes `sweep_select.json` into `root`.
pub fn write_sweep_select(root: &Path, criterion: SelectCriterion, threshold: Option<f64>) -> Result<SelectReport> {
    let report = sweep_select(root, criterion, threshold)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_atomic(&root.join("sweep_select.json"), &text)?;
    Ok(report)
}

/// `auto`, `log:a:b:n` or a comma-separated list of τ values.
#[derive(Debug, Clone, PartialEq)]
pub enum TauGrid {
    Auto,
    Values(Vec<f64>),
}

impl std::str::FromStr for TauGrid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad tau grid {s:?}; expected auto, log:a:b:n or a comma list"));
        let s = s.trim();
        if s == "auto" {
            return Ok(TauGrid::Auto);
        }
        if let Some(rest) = s.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let a: f64 = parts[0].parse().map_err(|_| bad())?;
            let b: f64 = parts[1].parse().map_err(|_| bad())?;
            let n: usize = parts[2].parse().map_err(|_| bad())?;
            if !(a > 0.0) || !(b >= a) || n == 0 {
                return Err(bad());
            }
            return Ok(TauGrid::Values(log_grid(a, b, n)));
        }
        let values = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        if values.is_empty() || values.iter().any(|v| !(*v >= 0.0)) {
            return Err(bad());
        }
        Ok(TauGrid::Values(values))
    }
}

fn dir_label(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Solve tables from several output directories. Each method × problem gets
/// the median evaluations to solve over all its runs. A method appearing in
/// more than one directory is labelled `<dirname>:<method>` everywhere.
pub fn solve_tables(dirs: &[PathBuf], threshold: Option<f64>) -> Result<BTreeMap<String, SolveTable>> {
    let mut per_dir: Vec<(String, BTreeMap<Method, BTreeMap<String, Vec<f64>>>)> = Vec::new();
    for dir in dirs {
        let runs = collect_runs(dir)?;
        if runs.is_empty() {
            return Err(Error::invalid(format!("no completed runs under {}", dir.display())));
        }
        let mut by_method: BTreeMap<Method, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
        for r in &runs {
            by_method
                .entry(r.summary.method)
                .or_default()
                .entry(r.summary.problem.clone())
                .or_default()
                .push(evals_as_f64(r.evals_to_solve(threshold)?));
        }
        per_dir.push((dir_label(dir), by_method));
    }
    let mut seen: BTreeMap<Method, usize> = BTreeMap::new();
    for (_, by_method) in &per_dir {
        for m in by_method.keys() {
            *seen.entry(*m).or_default() += 1;
        }
    }
    let mut tables = BTreeMap::new();
    for (label, by_method) in per_dir {
        for (method, problems) in by_method {
            let name = if seen[&method] > 1 {
                format!("{label}:{method}")
            } else {
                method.to_string()
            };
            let table: SolveTable = problems
                .into_iter()
                .map(|(p, v)| {
                    let m = median(&v);
                    (p, m.is_finite().then(|| m.round() as u64))
                })
                .collect();
            if tables.insert(name.clone(), table).is_some() {
                return Err(Error::invalid(format!("duplicate method label {name}")));
            }
        }
    }
    if tables.len() < 2 {
        return Err(Error::invalid("a profile needs at least two methods"));
    }
    Ok(tables)
}

pub fn profile_dirs(dirs: &[PathBuf], tau: &TauGrid, threshold: Option<f64>) -> Result<ProfileTable> {
    let tables = solve_tables(dirs, threshold)?;
    let grid = match tau {
        TauGrid::Auto => default_tau_grid(&tables)?,
        TauGrid::Values(v) => v.clone(),
    };
    performance_profile(&tables, &grid)
}
