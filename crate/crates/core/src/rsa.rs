//! Representational similarity analysis over disjoint stimulus pairs.
//!
//! Every stimulus enters at most one pair, so the per-pair similarities are
//! independent samples. Local RSA correlates frame-pair cosines with the
//! same-phoneme indicator; global RSA correlates cosines of pooled utterance
//! vectors with transcription string similarity, optionally controlling for a
//! confound similarity space through partial determination.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ActivationDataset, Condition, PhonemeId, SplitAssignment};
use crate::error::{Error, Result};
use crate::phonsim::{same_phoneme, string_similarity};
use crate::pooling::{attention_pool, attention_pool_vjp, cosine, cosine_with_grad, PoolingKind, PoolingSpec};
use crate::probes::{adam_step, AdamConfig, AdamState, FrameSet};
use crate::stats::{self, RegressionDesign};

/// Default number of frame pairs for local RSA.
pub const DEFAULT_LOCAL_PAIRS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Local,
    Global,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Local => "local",
            Scope::Global => "global",
        }
    }
}

/// Disjoint pairs with their similarity in each space.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub pairs: Vec<(usize, usize)>,
    pub neural_sim: Vec<f64>,
    pub symbolic_sim: Vec<f64>,
    pub confound_sim: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsaResult {
    /// Pearson r, or `sqrt|R²_partial|` for the confound-controlled variant.
    pub score: f64,
    pub n_pairs: usize,
    pub layer_id: usize,
    pub scope: Scope,
    pub pooling: Option<PoolingKind>,
    pub condition: Condition,
    pub seed: u64,
}

/// Draws `n_pairs` disjoint pairs of positions in `0..n_items`: seeded shuffle,
/// then adjacent pairing. Each item appears at most once.
pub fn sample_pairs(n_items: usize, n_pairs: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n_pairs > n_items / 2 {
        return Err(Error::NotEnoughItems {
            requested: n_pairs,
            available: n_items,
        });
    }
    let mut order: Vec<usize> = (0..n_items).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(order
        .chunks_exact(2)
        .take(n_pairs)
        .map(|c| (c[0], c[1]))
        .collect())
}

/// Local RSA on a stacked frame set.
pub fn local_rsa_frames(frames: &FrameSet, n_pairs: usize, seed: u64) -> Result<(f64, PairSample)> {
    let pairs = sample_pairs(frames.len(), n_pairs, seed)?;
    let mut neural = Vec::with_capacity(pairs.len());
    let mut symbolic = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        neural.push(cosine(frames.x.row(i), frames.x.row(j))?);
        symbolic.push(same_phoneme(frames.labels[i], frames.labels[j]));
    }
    let r = stats::pearson(&neural, &symbolic)?;
    Ok((
        r,
        PairSample {
            pairs,
            neural_sim: neural,
            symbolic_sim: symbolic,
            confound_sim: None,
        },
    ))
}

/// Local RSA on the validation half of one layer; frames from all utterances
/// of the half form one population.
pub fn local_rsa(
    dataset: &ActivationDataset,
    layer_id: usize,
    split: &SplitAssignment,
    n_pairs: usize,
    seed: u64,
) -> Result<RsaResult> {
    let (_, val) = split.indices(dataset);
    let frames = FrameSet::from_layer(dataset, layer_id, &val)?;
    let (score, sample) = local_rsa_frames(&frames, n_pairs, seed)?;
    Ok(RsaResult {
        score,
        n_pairs: sample.pairs.len(),
        layer_id,
        scope: Scope::Local,
        pooling: None,
        condition: dataset.condition(),
        seed,
    })
}

/// Global RSA over pooled vectors and their transcriptions.
pub fn global_rsa_items(
    pooled: &[Array1<f64>],
    transcriptions: &[Vec<PhonemeId>],
    n_pairs: usize,
    seed: u64,
) -> Result<(f64, PairSample)> {
    let pairs = sample_pairs(pooled.len(), n_pairs, seed)?;
    let mut neural = Vec::with_capacity(pairs.len());
    let mut symbolic = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        neural.push(cosine(pooled[i].view(), pooled[j].view())?);
        symbolic.push(string_similarity(&transcriptions[i], &transcriptions[j]));
    }
    let r = stats::pearson(&neural, &symbolic)?;
    Ok((
        r,
        PairSample {
            pairs,
            neural_sim: neural,
            symbolic_sim: symbolic,
            confound_sim: None,
        },
    ))
}

fn pool_all(dataset: &ActivationDataset, layer_id: usize, items: &[usize], pooling: &PoolingSpec) -> Result<Vec<Array1<f64>>> {
    let layer = dataset.layer(layer_id)?;
    items.iter().map(|&i| pooling.pool(layer.sequence(i))).collect()
}

fn transcriptions(dataset: &ActivationDataset, items: &[usize]) -> Vec<Vec<PhonemeId>> {
    items.iter().map(|&i| dataset.utterances()[i].transcription()).collect()
}

/// Global RSA on the validation half. `n_pairs = None` uses every utterance
/// of the half once (`floor(n/2)` pairs).
pub fn global_rsa(
    dataset: &ActivationDataset,
    layer_id: usize,
    pooling: &PoolingSpec,
    split: &SplitAssignment,
    n_pairs: Option<usize>,
    seed: u64,
) -> Result<RsaResult> {
    let (_, val) = split.indices(dataset);
    let pooled = pool_all(dataset, layer_id, &val, pooling)?;
    let n_pairs = n_pairs.unwrap_or(val.len() / 2);
    let (score, sample) = global_rsa_items(&pooled, &transcriptions(dataset, &val), n_pairs, seed)?;
    Ok(RsaResult {
        score,
        n_pairs: sample.pairs.len(),
        layer_id,
        scope: Scope::Global,
        pooling: Some(pooling.kind()),
        condition: dataset.condition(),
        seed,
    })
}

/// `R²_partial(Y, X | Z)` with Y = symbolic, X = neural, Z = confound similarities.
pub fn partial_from_similarities(neural: &[f64], symbolic: &[f64], confound: &[f64]) -> Result<f64> {
    stats::partial_r2(&RegressionDesign {
        y: symbolic.to_vec(),
        x: vec![neural.to_vec()],
        z: vec![confound.to_vec()],
    })
}

/// Confound-controlled global RSA; the score is `sqrt|R²_partial|`.
pub fn global_rsa_partial(
    dataset: &ActivationDataset,
    layer_id: usize,
    pooling: &PoolingSpec,
    split: &SplitAssignment,
    n_pairs: Option<usize>,
    seed: u64,
) -> Result<RsaResult> {
    let (_, val) = split.indices(dataset);
    let pooled = pool_all(dataset, layer_id, &val, pooling)?;
    let n_pairs = n_pairs.unwrap_or(val.len() / 2);
    let (_, sample) = global_rsa_items(&pooled, &transcriptions(dataset, &val), n_pairs, seed)?;
    let mut confound = Vec::with_capacity(sample.pairs.len());
    for &(i, j) in &sample.pairs {
        let (a, b) = (&dataset.utterances()[val[i]], &dataset.utterances()[val[j]]);
        match (&a.confound, &b.confound) {
            (Some(ca), Some(cb)) => confound.push(cosine(ArrayView1::from(ca), ArrayView1::from(cb))?),
            _ => return Err(Error::NoData("utterance without confound vector")),
        }
    }
    let r2 = partial_from_similarities(&sample.neural_sim, &sample.symbolic_sim, &confound)?;
    Ok(RsaResult {
        score: stats::sqrt_abs(r2),
        n_pairs: sample.pairs.len(),
        layer_id,
        scope: Scope::Global,
        pooling: Some(pooling.kind()),
        condition: dataset.condition(),
        seed,
    })
}

// ------------------------------------------------------ trained attention RSA

/// Pearson r between attention-pooled pair cosines and fixed targets, as a
/// differentiable function of the attention vector.
pub struct AttentionRsaObjective<'a> {
    pub sequences: Vec<ArrayView2<'a, f64>>,
    pub pairs: Vec<(usize, usize)>,
    pub targets: Vec<f64>,
}

impl AttentionRsaObjective<'_> {
    pub fn score(&self, w: ArrayView1<'_, f64>) -> Result<f64> {
        let mut neural = Vec::with_capacity(self.pairs.len());
        for &(i, j) in &self.pairs {
            let a = attention_pool(self.sequences[i], w)?;
            let b = attention_pool(self.sequences[j], w)?;
            neural.push(cosine(a.view(), b.view())?);
        }
        stats::pearson(&neural, &self.targets)
    }

    /// Pearson r and its gradient with respect to `w`.
    pub fn score_and_grad(&self, w: ArrayView1<'_, f64>) -> Result<(f64, Array1<f64>)> {
        let n = self.pairs.len();
        let mut pooled = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        let mut dcos = Vec::with_capacity(n);
        for &(i, j) in &self.pairs {
            let a = attention_pool(self.sequences[i], w)?;
            let b = attention_pool(self.sequences[j], w)?;
            let (c, da, db) = cosine_with_grad(a.view(), b.view())?;
            x.push(c);
            dcos.push((da, db));
            pooled.push((a, b));
        }
        if x.len() != self.targets.len() {
            return Err(Error::LengthMismatch(x.len(), self.targets.len()));
        }
        let mx = x.iter().sum::<f64>() / n as f64;
        let my = self.targets.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (xi, yi) in x.iter().zip(&self.targets) {
            sxy += (xi - mx) * (yi - my);
            sxx += (xi - mx).powi(2);
            syy += (yi - my).powi(2);
        }
        if sxx == 0.0 {
            return Err(Error::ZeroVariance("neural similarities"));
        }
        if syy == 0.0 {
            return Err(Error::ZeroVariance("string similarities"));
        }
        let norm = (sxx * syy).sqrt();
        let r = sxy / norm;
        let mut grad = Array1::zeros(w.len());
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let dr_dx = (self.targets[k] - my) / norm - r * (x[k] - mx) / sxx;
            let (da, db) = &dcos[k];
            let gi = attention_pool_vjp(self.sequences[i], w, (da * dr_dx).view())?;
            let gj = attention_pool_vjp(self.sequences[j], w, (db * dr_dx).view())?;
            grad += &gi.w;
            grad += &gj.w;
        }
        Ok((r, grad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttentionRsaConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub adam: AdamConfig,
    /// Pairs per half; `None` uses every utterance of the half once.
    pub n_pairs: Option<usize>,
}

impl Default for AttentionRsaConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 60,
            lr: 1e-3,
            adam: AdamConfig::default(),
            n_pairs: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttentionRsaRun {
    /// Attention vector of the best validation epoch.
    pub pooling: PoolingSpec,
    pub result: RsaResult,
    /// Entry 0 is the initialization (`w = 0`, i.e. mean pooling).
    pub train_r: Vec<f64>,
    pub val_r: Vec<f64>,
    pub best_epoch: usize,
}

/// Learns the attention vector by full-batch Adam ascent on the training
/// half's Pearson r, snapshotting the epoch with the best validation r.
pub fn train_attention_rsa(
    dataset: &ActivationDataset,
    layer_id: usize,
    split: &SplitAssignment,
    cfg: &AttentionRsaConfig,
) -> Result<AttentionRsaRun> {
    let layer = dataset.layer(layer_id)?;
    let (tr, va) = split.indices(dataset);
    let build = |items: &[usize]| -> Result<AttentionRsaObjective<'_>> {
        let n_pairs = cfg.n_pairs.unwrap_or(items.len() / 2);
        let pairs = sample_pairs(items.len(), n_pairs, cfg.seed)?;
        let texts = transcriptions(dataset, items);
        Ok(AttentionRsaObjective {
            sequences: items.iter().map(|&i| layer.sequence(i)).collect(),
            targets: pairs.iter().map(|&(i, j)| string_similarity(&texts[i], &texts[j])).collect(),
            pairs,
        })
    };
    let train = build(&tr)?;
    let val = build(&va)?;
    let mut w = Array1::<f64>::zeros(layer.dim);
    let mut state = AdamState::new(layer.dim);
    let mut train_r = vec![train.score(w.view())?];
    let mut val_r = vec![val.score(w.view())?];
    let mut best = (0, val_r[0], w.clone());
    for epoch in 1..=cfg.epochs {
        let (_, grad) = train.score_and_grad(w.view())?;
        let loss_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        adam_step(w.as_slice_mut().expect("contiguous"), &loss_grad, &mut state, cfg.lr, &cfg.adam)?;
        train_r.push(train.score(w.view())?);
        let v = val.score(w.view())?;
        val_r.push(v);
        if v > best.1 {
            best = (epoch, v, w.clone());
        }
    }
    let (best_epoch, score, w) = best;
    Ok(AttentionRsaRun {
        pooling: PoolingSpec::Attention { w },
        result: RsaResult {
            score,
            n_pairs: val.pairs.len(),
            layer_id,
            scope: Scope::Global,
            pooling: Some(PoolingKind::Attention),
            condition: dataset.condition(),
            seed: cfg.seed,
        },
        train_r,
        val_r,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use std::collections::HashSet;

    #[test]
    fn pairs_exhaust_even_item_sets() {
        let pairs = sample_pairs(4, 2, 1).unwrap();
        let used: HashSet<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        assert_eq!(used.len(), 4);
    }

    #[test]
    fn pairs_leave_odd_item_out() {
        let pairs = sample_pairs(5, 2, 9).unwrap();
        let used: HashSet<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        assert_eq!(used.len(), 4);
    }

    #[test]
    fn pairs_deterministic_and_bounded() {
        assert_eq!(sample_pairs(100, 30, 4).unwrap(), sample_pairs(100, 30, 4).unwrap());
        assert!(matches!(sample_pairs(5, 3, 0), Err(Error::NotEnoughItems { .. })));
    }

    #[test]
    fn pairs_are_disjoint_exhaustively() {
        for n in 0..30 {
            for k in 0..=n / 2 {
                let pairs = sample_pairs(n, k, (n * 31 + k) as u64).unwrap();
                let mut seen = HashSet::new();
                for (a, b) in pairs {
                    assert!(a != b && seen.insert(a) && seen.insert(b));
                }
            }
        }
    }

    /// Places pair `k`'s two items at the positions `sample_pairs` assigns it.
    fn place<T: Clone + Default>(n: usize, seed: u64, by_pair: &[(T, T)]) -> Vec<T> {
        let mut out = vec![T::default(); n];
        for (k, &(a, b)) in sample_pairs(n, by_pair.len(), seed).unwrap().iter().enumerate() {
            out[a] = by_pair[k].0.clone();
            out[b] = by_pair[k].1.clone();
        }
        out
    }

    #[test]
    fn perfect_local_agreement() {
        // cosines (1, 0, 1) against indicators (1, 0, 1)
        let vecs = place(6, 0, &[
            ((vec![1.0, 0.0], 0), (vec![2.0, 0.0], 0)),
            ((vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1)),
            ((vec![0.0, 3.0], 1), (vec![0.0, 1.0], 1)),
        ]);
        let frames = FrameSet {
            x: Array2::from_shape_fn((6, 2), |(i, d)| vecs[i].0[d]),
            labels: vecs.iter().map(|v| v.1).collect(),
        };
        let (r, sample) = local_rsa_frames(&frames, 3, 0).unwrap();
        assert_eq!(sample.neural_sim, vec![1.0, 0.0, 1.0]);
        assert_eq!(sample.symbolic_sim, vec![1.0, 0.0, 1.0]);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_global_fixture() {
        // cosines (1, 0.707, 0) against string similarities (1, 2/3, 0)
        let items = place(6, 0, &[
            ((vec![1.0, 0.0], vec![0, 1, 2]), (vec![1.0, 0.0], vec![0, 1, 2])),
            ((vec![1.0, 0.0], vec![0, 1, 2]), (vec![1.0, 1.0], vec![0, 1, 3])),
            ((vec![1.0, 0.0], vec![0, 1, 2]), (vec![0.0, 1.0], vec![3, 4, 5])),
        ]);
        let pooled: Vec<Array1<f64>> = items.iter().map(|i| Array1::from(i.0.clone())).collect();
        let texts: Vec<Vec<usize>> = items.iter().map(|i| i.1.clone()).collect();
        let (r, _) = global_rsa_items(&pooled, &texts, 3, 0).unwrap();
        assert!(r > 0.99, "r = {r}");
    }

    #[test]
    fn identical_utterances_are_degenerate() {
        let pooled = vec![array![1.0, 2.0]; 6];
        let texts = vec![vec![1, 2, 3]; 6];
        assert!(matches!(global_rsa_items(&pooled, &texts, 3, 0), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn zero_w_score_equals_mean_pooling() {
        let seqs: Vec<Array2<f64>> = (0..8)
            .map(|i| Array2::from_shape_fn((3 + i % 3, 3), |(t, d)| ((i * 7 + t * 3 + d) as f64).sin()))
            .collect();
        let texts: Vec<Vec<usize>> = (0..8).map(|i| (0..(2 + i % 4)).map(|k| (k * i) % 5).collect()).collect();
        let pairs = sample_pairs(8, 4, 3).unwrap();
        let objective = AttentionRsaObjective {
            sequences: seqs.iter().map(|s| s.view()).collect(),
            targets: pairs.iter().map(|&(i, j)| string_similarity(&texts[i], &texts[j])).collect(),
            pairs,
        };
        let pooled: Vec<Array1<f64>> = seqs.iter().map(|s| crate::pooling::mean_pool(s.view()).unwrap()).collect();
        let (mean_r, _) = global_rsa_items(&pooled, &texts, 4, 3).unwrap();
        assert_eq!(objective.score(Array1::zeros(3).view()).unwrap(), mean_r);
    }
}
