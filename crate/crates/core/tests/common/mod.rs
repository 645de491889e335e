//! Independent test oracles: central finite differences over plain closures.
#![allow(dead_code)]

use manifold_dfo::linalg::{sample_unit_sphere, standard_normal_vec, RngStream};
use manifold_dfo::netdiff::{ManifoldModel, MlpSpec};

/// Central difference of `f` along coordinate `i`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len()).map(|i| central_diff(&f, x, i, h)).collect()
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| rel_err(*x, *y, floor)).fold(0.0, f64::max)
}

/// Plain re-implementation of the model's forward pass: per layer, weights
/// row-major then biases; encoder layers then head layers.
pub fn reference_forward(model: &ManifoldModel, x: &[f64]) -> (Vec<f64>, f64, Vec<f64>) {
    let mut pre_all = Vec::new();
    let z = reference_mlp(&model.encoder.spec, &model.encoder.params, x, &mut pre_all);
    let out = reference_mlp(&model.head.spec, &model.head.params, &z, &mut pre_all);
    (z, out[0], pre_all)
}

fn reference_mlp(spec: &MlpSpec, params: &[f64], x: &[f64], pre_all: &mut Vec<f64>) -> Vec<f64> {
    use manifold_dfo::netdiff::Activation;
    let mut a = x.to_vec();
    let mut off = 0;
    for (l, w) in spec.layer_dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let mut next = vec![0.0; fan_out];
        for (i, nx) in next.iter_mut().enumerate() {
            let mut s = params[off + fan_in * fan_out + i];
            for j in 0..fan_in {
                s += params[off + i * fan_in + j] * a[j];
            }
            pre_all.push(s);
            *nx = match spec.activations[l] {
                Activation::Relu => s.max(0.0),
                Activation::Identity => s,
            };
        }
        off += fan_in * fan_out + fan_out;
        a = next;
    }
    a
}

/// Splits a flat `(θ, ψ)` vector back into a model.
pub fn with_params(model: &ManifoldModel, p: &[f64]) -> ManifoldModel {
    let mut m = model.clone();
    let nt = m.encoder.params.len();
    m.encoder.params.copy_from_slice(&p[..nt]);
    m.head.params.copy_from_slice(&p[nt..]);
    m
}

pub fn flat_params(model: &ManifoldModel) -> Vec<f64> {
    model.theta().iter().chain(model.psi()).copied().collect()
}

/// Random model with every pre-activation at `x` and at `x ± h` perturbations
/// of size `margin` away from zero, so no finite difference crosses a kink.
pub fn model_away_from_kinks(
    d: usize,
    n: usize,
    x: &[f64],
    margin: f64,
    seed: u64,
) -> Option<ManifoldModel> {
    let model = ManifoldModel::init_standard_normal(
        MlpSpec::encoder(d, n).unwrap(),
        MlpSpec::head(n).unwrap(),
        &RngStream::new(seed),
    )
    .unwrap();
    let (_, _, pre) = reference_forward(&model, x);
    pre.iter().all(|p| p.abs() > margin).then_some(model)
}

/// Whether every pre-activation exceeds `margin` in magnitude.
pub fn clear_of_kinks(model: &ManifoldModel, x: &[f64], margin: f64) -> bool {
    let (_, _, pre) = reference_forward(model, x);
    pre.iter().all(|p| p.abs() > margin)
}

/// 100 (model, x, u) triples with every pre-activation clear of a kink.
pub fn kink_free_configurations() -> Vec<(ManifoldModel, Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    let shapes = [(5usize, 2usize), (12, 3), (20, 2), (8, 4)];
    for seed in 0u64.. {
        if out.len() == 100 {
            break;
        }
        let (d, n) = shapes[(seed % 4) as usize];
        let x = standard_normal_vec(d, &RngStream::new(seed).derive(77));
        if let Some(m) = model_away_from_kinks(d, n, &x, 1e-3, seed) {
            let u = sample_unit_sphere(d, &RngStream::new(seed).derive(78)).unwrap().into_vec();
            out.push((m, x, u));
        }
    }
    out
}
