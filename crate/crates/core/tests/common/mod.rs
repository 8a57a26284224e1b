#![allow(dead_code)]

pub mod oracle;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use phonoprobe::data::{ActivationDataset, Condition, LayerActivations, Utterance};
use phonoprobe::synth::{self, SynthConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

pub fn normal_array(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from(normal_vec(rng, n))
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| normal(rng))
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    rel_err(&[a], &[b])
}

/// Central differences of a scalar function at `x`.
pub fn numeric_grad(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

pub fn synth_cfg(seed: u64, condition: Condition) -> SynthConfig {
    SynthConfig {
        seed,
        condition,
        ..SynthConfig::default()
    }
}

pub fn synth(cfg: &SynthConfig) -> ActivationDataset {
    synth::generate(cfg).expect("synthetic dataset").dataset
}

/// A dataset sharing `base`'s inventory and utterances with one replacement
/// layer whose frames come from `frame(utterance, input_frame)`.
pub fn with_layer(
    base: &ActivationDataset,
    dim: usize,
    mut frame: impl FnMut(&Utterance, usize) -> Vec<f64>,
) -> ActivationDataset {
    let sequences = base
        .utterances()
        .iter()
        .map(|u| {
            let rows: Vec<f64> = (0..u.n_input_frames).flat_map(|t| frame(u, t)).collect();
            Array2::from_shape_vec((u.n_input_frames, dim), rows).unwrap()
        })
        .collect();
    let layer = LayerActivations {
        layer_id: 0,
        name: "custom".into(),
        dim,
        rate_divisor: 1,
        file: "layer_00.actv".into(),
        sequences,
    };
    ActivationDataset::new(
        base.inventory().clone(),
        base.utterances().to_vec(),
        vec![layer],
        base.condition(),
    )
    .unwrap()
}

/// `base` with every activation multiplied by `factor`.
pub fn scaled(base: &ActivationDataset, factor: f64) -> ActivationDataset {
    let layers = base
        .layers()
        .iter()
        .map(|l| LayerActivations {
            sequences: l.sequences.iter().map(|s| s * factor).collect(),
            ..l.clone()
        })
        .collect();
    ActivationDataset::new(
        base.inventory().clone(),
        base.utterances().to_vec(),
        layers,
        base.condition(),
    )
    .unwrap()
}
