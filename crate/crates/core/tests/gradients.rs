mod common;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use common::{normal_array, normal_matrix, numeric_grad, rel_err, rng};
use phonoprobe::pooling::{attention_pool, attention_pool_vjp, cosine, cosine_with_grad, PoolingKind};
use phonoprobe::probes::{FrameSet, GlobalObjective, LocalObjective, Objective, UtteranceSet};
use phonoprobe::rsa::AttentionRsaObjective;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn view(v: &[f64]) -> ArrayView1<'_, f64> {
    ArrayView1::from(v)
}

#[test]
fn attention_vjp_matches_central_differences() {
    for seed in 0..100 {
        let mut r = rng(seed);
        let (t, d) = (r.random_range(1..=8), r.random_range(1..=5));
        let seq = normal_matrix(&mut r, t, d);
        let w = normal_array(&mut r, d);
        let up = normal_array(&mut r, d);
        let g = attention_pool_vjp(seq.view(), w.view(), up.view()).unwrap();

        let num_w = numeric_grad(w.as_slice().unwrap(), STEP, |w| {
            attention_pool(seq.view(), view(w)).unwrap().dot(&up)
        });
        assert!(rel_err(g.w.as_slice().unwrap(), &num_w) < TOL, "seed {seed}: w");

        let flat: Vec<f64> = seq.iter().copied().collect();
        let num_seq = numeric_grad(&flat, STEP, |s| {
            let m = Array2::from_shape_vec((t, d), s.to_vec()).unwrap();
            attention_pool(m.view(), w.view()).unwrap().dot(&up)
        });
        let analytic: Vec<f64> = g.seq.iter().copied().collect();
        assert!(rel_err(&analytic, &num_seq) < TOL, "seed {seed}: seq");
    }
}

#[test]
fn attention_vjp_five_by_three() {
    let mut r = rng(5);
    let seq = normal_matrix(&mut r, 5, 3);
    let w = normal_array(&mut r, 3);
    let up = normal_array(&mut r, 3);
    let g = attention_pool_vjp(seq.view(), w.view(), up.view()).unwrap();
    let num = numeric_grad(w.as_slice().unwrap(), STEP, |w| attention_pool(seq.view(), view(w)).unwrap().dot(&up));
    assert!(rel_err(g.w.as_slice().unwrap(), &num) < TOL);
}

#[test]
fn cosine_gradient_matches_central_differences() {
    for seed in 0..50 {
        let mut r = rng(300 + seed);
        let d = r.random_range(2..=6);
        let u = normal_array(&mut r, d);
        let v = normal_array(&mut r, d);
        let (c, du, dv) = cosine_with_grad(u.view(), v.view()).unwrap();
        assert!((c - cosine(u.view(), v.view()).unwrap()).abs() < 1e-15);
        let num_u = numeric_grad(u.as_slice().unwrap(), STEP, |x| cosine(view(x), v.view()).unwrap());
        let num_v = numeric_grad(v.as_slice().unwrap(), STEP, |x| cosine(u.view(), view(x)).unwrap());
        assert!(rel_err(du.as_slice().unwrap(), &num_u) < TOL);
        assert!(rel_err(dv.as_slice().unwrap(), &num_v) < TOL);
    }
}

#[test]
fn local_probe_loss_gradient() {
    let (d, p, n) = (4, 3, 8);
    for seed in 0..10 {
        let mut r = rng(400 + seed);
        let train = FrameSet {
            x: normal_matrix(&mut r, n, d),
            labels: (0..n).map(|i| i % p).collect(),
        };
        let objective = LocalObjective {
            train: &train,
            val: &train,
            n_classes: p,
        };
        let params: Vec<f64> = normal_array(&mut r, p * d + p).to_vec();
        let batch: Vec<usize> = (0..n).collect();
        let (loss, grad) = objective.loss_and_grad(&params, &batch);
        assert!((loss - objective.train_loss(&params)).abs() < 1e-12);
        let num = numeric_grad(&params, STEP, |q| objective.loss_and_grad(q, &batch).0);
        assert!(rel_err(&grad, &num) < TOL, "seed {seed}");

        let sub = [1, 4, 6];
        let (_, grad) = objective.loss_and_grad(&params, &sub);
        let num = numeric_grad(&params, STEP, |q| objective.loss_and_grad(q, &sub).0);
        assert!(rel_err(&grad, &num) < TOL, "seed {seed}, minibatch");
    }
}

fn global_instance(seed: u64, d: usize, p: usize, n: usize) -> (Vec<Array2<f64>>, Array2<f64>) {
    let mut r = rng(seed);
    let seqs = (0..n)
        .map(|_| {
            let t = r.random_range(1..=6);
            normal_matrix(&mut r, t, d)
        })
        .collect();
    let presence = Array2::from_shape_fn((n, p), |_| if r.random_bool(0.5) { 1.0 } else { 0.0 });
    (seqs, presence)
}

#[test]
fn global_probe_loss_gradient() {
    let (d, p, n) = (4, 3, 8);
    for kind in [PoolingKind::Mean, PoolingKind::Attention] {
        for seed in 0..10 {
            let (seqs, presence) = global_instance(500 + seed, d, p, n);
            let set = UtteranceSet {
                sequences: seqs.iter().map(|s| s.view()).collect(),
                presence,
            };
            let active = vec![true, seed % 2 == 0, true];
            let objective = GlobalObjective::new(&set, &set, p, kind, active).unwrap();
            let mut r = rng(600 + seed);
            let params: Vec<f64> = normal_array(&mut r, objective.n_params()).to_vec();
            let batch: Vec<usize> = (0..n).collect();
            let (loss, grad) = objective.loss_and_grad(&params, &batch);
            assert!((loss - objective.train_loss(&params)).abs() < 1e-12);
            let num = numeric_grad(&params, STEP, |q| objective.loss_and_grad(q, &batch).0);
            assert!(rel_err(&grad, &num) < TOL, "{kind:?} seed {seed}");
        }
    }
}

#[test]
fn attention_rsa_objective_gradient() {
    for seed in 0..10 {
        let mut r = rng(700 + seed);
        let d = 5;
        let seqs: Vec<Array2<f64>> = (0..20)
            .map(|_| {
                let t = r.random_range(2..=7);
                normal_matrix(&mut r, t, d)
            })
            .collect();
        let pairs: Vec<(usize, usize)> = (0..10).map(|k| (2 * k, 2 * k + 1)).collect();
        let targets: Vec<f64> = (0..10).map(|_| r.random_range(0.0..1.0)).collect();
        let objective = AttentionRsaObjective {
            sequences: seqs.iter().map(|s| s.view()).collect(),
            pairs,
            targets,
        };
        let w: Array1<f64> = normal_array(&mut r, d);
        let (score, grad) = objective.score_and_grad(w.view()).unwrap();
        assert!((score - objective.score(w.view()).unwrap()).abs() < 1e-12);
        let num = numeric_grad(w.as_slice().unwrap(), STEP, |x| objective.score(view(x)).unwrap());
        assert!(rel_err(grad.as_slice().unwrap(), &num) < TOL, "seed {seed}");
    }
}
