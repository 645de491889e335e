use rand::Rng;
use rand_distr::StandardNormal;

use super::objective::{Objective, ProblemDescriptor};
use crate::error::{Error, Result};
use crate::linalg::{purpose, RngStream};

/// `F(x, ξ) = base(x, ξ) + σ·N(0,1)` with the Gaussian drawn from a stream
/// addressed by the noise seed. Variance is exactly `σ²` at every point.
pub fn with_noise(base: Objective, sigma: f64) -> Result<Objective> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise level must be a finite σ ≥ 0, got {sigma}")));
    }
    let descriptor = ProblemDescriptor {
        sigma,
        ..base.descriptor().clone()
    };
    let dim = base.dim();
    let minimum = base.global_minimum().cloned();
    let inner = base.shared_fn();
    let noisy = Objective::new(dim, descriptor, move |x, seed| {
        let value = inner(x, seed);
        if sigma == 0.0 {
            return value;
        }
        let eps: f64 = RngStream::new(seed)
            .derive(purpose::NOISE)
            .generator()
            .sample(StandardNormal);
        value + sigma * eps
    });
    Ok(match minimum {
        Some(m) => noisy.with_minimum(m),
        None => noisy,
    })
}
