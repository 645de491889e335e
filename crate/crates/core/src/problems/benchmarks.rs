//! Classical unconstrained test functions.
//!
//! Standard forms used here (`d` is the dimension, indices from 1):
//!
//! | name              | formula                                                    | minimum        |
//! |-------------------|------------------------------------------------------------|----------------|
//! | `sphere`          | `Σ xᵢ²`                                                    | 0 at 0         |
//! | `cigar`           | `x₁² + 10⁶ Σ_{i≥2} xᵢ²`                                    | 0 at 0         |
//! | `tablet`          | `10⁶ x₁² + Σ_{i≥2} xᵢ²`                                    | 0 at 0         |
//! | `elli`            | `Σ 10^{6(i−1)/(d−1)} xᵢ²`                                  | 0 at 0         |
//! | `rosenbrock`      | `Σ_{i<d} 100(xᵢ₊₁ − xᵢ²)² + (1 − xᵢ)²`                     | 0 at 1         |
//! | `diffpow`         | `Σ |xᵢ|^{2 + 4(i−1)/(d−1)}`                                | 0 at 0         |
//! | `rastrigin`       | `10d + Σ (xᵢ² − 10 cos 2πxᵢ)`                              | 0 at 0         |
//! | `schwefel2_22`    | `Σ |xᵢ| + Π |xᵢ|`                                          | 0 at 0         |
//! | `styblinski_tang` | `½ Σ (xᵢ⁴ − 16xᵢ² + 5xᵢ)`                                  | ≈ −39.166·d    |
//! | `happycat`        | `|‖x‖² − d|^{1/4} + (½‖x‖² + Σ xᵢ)/d + ½`                  | 0 at −1        |

use std::f64::consts::PI;

use super::objective::{GlobalMinimum, Objective, ProblemDescriptor};
use crate::error::{Error, Result};

pub const BENCHMARK_NAMES: [&str; 10] = [
    "sphere",
    "cigar",
    "tablet",
    "elli",
    "rosenbrock",
    "diffpow",
    "rastrigin",
    "schwefel2_22",
    "styblinski_tang",
    "happycat",
];

type Scalar = fn(&[f64]) -> f64;

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn cigar(x: &[f64]) -> f64 {
    x[0] * x[0] + 1e6 * x[1..].iter().map(|v| v * v).sum::<f64>()
}

fn tablet(x: &[f64]) -> f64 {
    1e6 * x[0] * x[0] + x[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Exponent ramp `(i−1)/(d−1)`, defined as 0 for `d = 1`.
fn ramp(i: usize, d: usize) -> f64 {
    if d == 1 {
        0.0
    } else {
        i as f64 / (d - 1) as f64
    }
}

fn elli(x: &[f64]) -> f64 {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, v)| 1e6f64.powf(ramp(i, d)) * v * v)
        .sum()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

fn diffpow(x: &[f64]) -> f64 {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, v)| v.abs().powf(2.0 + 4.0 * ramp(i, d)))
        .sum()
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

fn schwefel2_22(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum::<f64>() + x.iter().map(|v| v.abs()).product::<f64>()
}

fn styblinski_tang(x: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v)
        .sum::<f64>()
}

fn happycat(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let s: f64 = x.iter().sum();
    (r2 - d).abs().powf(0.25) + (0.5 * r2 + s) / d + 0.5
}

/// Root of `4x³ − 32x + 5` near −2.9, the per-coordinate Styblinski–Tang minimizer.
fn styblinski_tang_root() -> f64 {
    let mut x = -2.9f64;
    for _ in 0..50 {
        let f = 4.0 * x.powi(3) - 32.0 * x + 5.0;
        let df = 12.0 * x * x - 32.0;
        x -= f / df;
    }
    x
}

fn lookup(name: &str, dim: usize) -> Option<(Scalar, Vec<f64>)> {
    let zero = vec![0.0; dim];
    Some(match name {
        "sphere" => (sphere as Scalar, zero),
        "cigar" => (cigar, zero),
        "tablet" => (tablet, zero),
        "elli" => (elli, zero),
        "rosenbrock" => (rosenbrock, vec![1.0; dim]),
        "diffpow" => (diffpow, zero),
        "rastrigin" => (rastrigin, zero),
        "schwefel2_22" => (schwefel2_22, zero),
        "styblinski_tang" => (styblinski_tang, vec![styblinski_tang_root(); dim]),
        "happycat" => (happycat, vec![-1.0; dim]),
        _ => return None,
    })
}

/// A deterministic, noiseless benchmark objective.
pub fn make_benchmark(name: &str, dim: usize) -> Result<Objective> {
    if dim == 0 {
        return Err(Error::invalid("benchmark dimension must be positive"));
    }
    let (func, location) = lookup(name, dim).ok_or_else(|| {
        Error::invalid(format!(
            "unknown benchmark '{name}'; supported: {}",
            BENCHMARK_NAMES.join(", ")
        ))
    })?;
    if name == "rosenbrock" && dim < 2 {
        return Err(Error::invalid("rosenbrock needs dimension ≥ 2"));
    }
    let value = func(&location);
    Ok(
        Objective::new(dim, ProblemDescriptor::benchmark(name, dim), move |x, _| func(x))
            .with_minimum(GlobalMinimum { value, location }),
    )
}
