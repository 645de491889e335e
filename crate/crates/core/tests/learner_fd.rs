mod common;

use common::*;
use manifold_dfo::estimators::EvaluationRecord;
use manifold_dfo::learner::objective_gradient;
use manifold_dfo::linalg::{sample_unit_sphere, standard_normal_vec, DenseVector, RngStream};
use manifold_dfo::netdiff::ManifoldModel;

const H: f64 = 1e-5;
const MARGIN: f64 = 1e-3;
const TOL: f64 = 1e-5;
const FLOOR: f64 = 1e-3;

struct Case {
    model: ManifoldModel,
    x: Vec<f64>,
    records: Vec<EvaluationRecord>,
    snapshot_grad: Vec<f64>,
    wl: f64,
    wr: f64,
}

/// `wl·Σ(y/2δ − D)² + wr·‖∇ₓg(x) − s‖`, built from the model's own
/// directional derivative and input gradient (both checked against finite
/// differences in `netdiff_fd`).
fn objective(c: &Case, m: &ManifoldModel) -> f64 {
    let fit: f64 = c
        .records
        .iter()
        .map(|r| {
            let res = r.y / (2.0 * r.delta) - m.directional_derivative(r.x.as_slice(), r.u.as_slice()).unwrap();
            res * res
        })
        .sum();
    let g = m.input_gradient(&c.x).unwrap();
    let reg = g
        .iter()
        .zip(&c.snapshot_grad)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    c.wl * fit + c.wr * reg
}

fn cases() -> Vec<Case> {
    let shapes = [(6usize, 2usize), (8, 3), (10, 2)];
    let mut out = Vec::new();
    for seed in 0u64.. {
        if out.len() == 50 {
            break;
        }
        let rng = RngStream::new(seed);
        let (d, n) = shapes[(seed % 3) as usize];
        let x = standard_normal_vec(d, &rng.derive(1));
        let Some(model) = model_away_from_kinks(d, n, &x, MARGIN, seed) else {
            continue;
        };
        let k = 3 + (seed % 4) as usize;
        let ys = standard_normal_vec(k, &rng.derive(3));
        let records = (0..k)
            .map(|i| EvaluationRecord {
                x: DenseVector::new(x.clone()).unwrap(),
                u: sample_unit_sphere(d, &rng.derive(2).derive(i as u64)).unwrap(),
                y: ys[i],
                delta: 0.05,
                iteration: 1,
            })
            .collect();
        let snapshot_grad = standard_normal_vec(d, &rng.derive(4));
        let (wl, wr) = match seed % 3 {
            0 => (1.0 / k as f64, 0.0),
            1 => (1.0 / k as f64, 10.0),
            _ => (1.0, 0.5),
        };
        out.push(Case {
            model,
            x,
            records,
            snapshot_grad,
            wl,
            wr,
        });
    }
    out
}

#[test]
fn objective_gradient_matches_fd() {
    let mut worst: f64 = 0.0;
    for c in cases() {
        let recs: Vec<&EvaluationRecord> = c.records.iter().collect();
        let x = DenseVector::new(c.x.clone()).unwrap();
        let s = DenseVector::new(c.snapshot_grad.clone()).unwrap();
        let (gt, gp) = objective_gradient(&c.model, &s, &recs, &x, c.wl, c.wr).unwrap();
        let analytic: Vec<f64> = gt.into_iter().chain(gp).collect();
        let p0 = flat_params(&c.model);
        let fd = fd_gradient(|p| objective(&c, &with_params(&c.model, p)), &p0, H);
        let e = max_rel_err(&analytic, &fd, FLOOR);
        worst = worst.max(e);
    }
    assert!(worst < TOL, "worst relative error {worst:e}");
}
