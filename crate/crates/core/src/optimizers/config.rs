use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimators::Aggregation;

/// Exploration/manifold mixing weight.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Beta {
    /// `1/d`, resolved at run time.
    #[default]
    Auto,
    Value(f64),
}

impl Beta {
    pub fn resolve(self, d: usize) -> f64 {
        match self {
            Beta::Auto => 1.0 / d as f64,
            Beta::Value(b) => b,
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Auto => s.serialize_str("auto"),
            Beta::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Beta;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"auto\" or a number in [0, 1]")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Beta, E> {
                if v == "auto" {
                    Ok(Beta::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Beta, E> {
                Ok(Beta::Value(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Beta, E> {
                Ok(Beta::Value(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Beta, E> {
                Ok(Beta::Value(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub alpha: f64,
    pub delta: f64,
    pub k_e: usize,
    pub k_m: usize,
    pub beta: Beta,
    pub max_evals: u64,
    pub stop_grad_tol: f64,
    /// Iterations inspected by the stationarity rule; `None` disables it.
    pub stop_window: Option<usize>,
    /// Keep only the `b` pairs with the largest `|y|`.
    pub top_b: Option<usize>,
    /// Divide α by the standard deviation of the kept `y` values.
    pub step_std_scaling: bool,
    pub aggregation: Aggregation,
    /// Probe the projection residual every this many iterations.
    pub metrics_every: Option<u64>,
    pub probe_k: usize,
    /// Fill `wall_ms`. Off by default so traces are reproducible bit for bit.
    pub record_wall_time: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            alpha: 0.01,
            delta: 0.01,
            k_e: 2,
            k_m: 2,
            beta: Beta::Auto,
            max_evals: 10_000,
            stop_grad_tol: 0.0,
            stop_window: None,
            top_b: None,
            step_std_scaling: false,
            aggregation: Aggregation::Mean,
            metrics_every: None,
            probe_k: crate::metrics::DEFAULT_PROBE_K,
            record_wall_time: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.k_e + self.k_m == 0 {
            return bad("k_e + k_m must be at least 1".into());
        }
        if let Beta::Value(b) = self.beta {
            if !(0.0..=1.0).contains(&b) {
                return bad(format!("beta must lie in [0, 1] or be \"auto\", got {b}"));
            }
        }
        if self.max_evals == 0 {
            return bad("max_evals must be positive".into());
        }
        if !(self.stop_grad_tol >= 0.0) {
            return bad(format!("stop_grad_tol must be ≥ 0, got {}", self.stop_grad_tol));
        }
        if self.stop_window == Some(0) {
            return bad("stop_window must be positive".into());
        }
        if self.top_b == Some(0) {
            return bad("top_b must be positive".into());
        }
        if self.metrics_every == Some(0) {
            return bad("metrics_every must be positive".into());
        }
        if self.probe_k == 0 {
            return bad("probe_k must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_json() {
        let c: OptimizerConfig = serde_json::from_str(r#"{"beta": "auto"}"#).unwrap();
        assert_eq!(c.beta, Beta::Auto);
        let c: OptimizerConfig = serde_json::from_str(r#"{"beta": 0.25}"#).unwrap();
        assert_eq!(c.beta, Beta::Value(0.25));
        let c: OptimizerConfig = serde_json::from_str(r#"{"beta": 1}"#).unwrap();
        assert_eq!(c.beta, Beta::Value(1.0));
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"beta": "half"}"#).is_err());
        assert_eq!(serde_json::to_string(&Beta::Auto).unwrap(), "\"auto\"");
        assert_eq!(Beta::Auto.resolve(100), 0.01);
    }

    #[test]
    fn validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        for c in [
            OptimizerConfig { k_e: 0, k_m: 0, ..Default::default() },
            OptimizerConfig { beta: Beta::Value(1.5), ..Default::default() },
            OptimizerConfig { alpha: 0.0, ..Default::default() },
            OptimizerConfig { stop_window: Some(0), ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"alpah": 1}"#).is_err());
    }
}
