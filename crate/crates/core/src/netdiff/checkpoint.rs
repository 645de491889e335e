use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::{ManifoldModel, Mlp, MlpSpec};
use crate::error::{Error, Result};
use crate::linalg::RngStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub encoder: MlpSpec,
    pub head: MlpSpec,
}

#[derive(Serialize)]
struct CheckpointOut<'a> {
    spec: ModelSpec,
    theta: Vec<Box<RawValue>>,
    psi: Vec<Box<RawValue>>,
    rng_state: &'a RngStream,
}

#[derive(Deserialize)]
struct CheckpointIn {
    spec: ModelSpec,
    theta: Vec<f64>,
    psi: Vec<f64>,
    rng_state: RngStream,
}

/// 17 significant digits, always enough to round-trip an `f64`.
fn exact(v: f64) -> Box<RawValue> {
    RawValue::from_string(format!("{v:.16e}")).expect("formatted float is valid JSON")
}

/// Serializes `{spec, theta, psi, rng_state}`.
pub fn checkpoint_to_json(model: &ManifoldModel, rng_state: &RngStream) -> Result<String> {
    let out = CheckpointOut {
        spec: ModelSpec {
            encoder: model.encoder.spec.clone(),
            head: model.head.spec.clone(),
        },
        theta: model.theta().iter().copied().map(exact).collect(),
        psi: model.psi().iter().copied().map(exact).collect(),
        rng_state,
    };
    Ok(serde_json::to_string_pretty(&out)?)
}

pub fn checkpoint_from_json(json: &str) -> Result<(ManifoldModel, RngStream)> {
    let c: CheckpointIn = serde_json::from_str(json)?;
    let model = ManifoldModel::new(Mlp::new(c.spec.encoder, c.theta)?, Mlp::new(c.spec.head, c.psi)?)?;
    Ok((model, c.rng_state))
}

pub fn load_checkpoint(path: &Path) -> Result<(ManifoldModel, RngStream)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let rng = RngStream::new(77).derive(3);
        let model = ManifoldModel::init_standard_normal(
            MlpSpec::encoder(6, 2).unwrap(),
            MlpSpec::head(2).unwrap(),
            &rng,
        )
        .unwrap();
        let json = checkpoint_to_json(&model, &rng).unwrap();
        let (back, state) = checkpoint_from_json(&json).unwrap();
        assert_eq!(back, model);
        assert_eq!(state, rng);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["theta"].is_array() && v["psi"].is_array() && v["spec"].is_object());
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = exact(0.1).to_string();
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17, "{s}");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }
}
