//! Diagnostic classifiers: a frame-level softmax probe (local scope) and an
//! utterance-level multi-label sigmoid probe over pooled activations (global
//! scope), trained with Adam under a plateau/early-stopping protocol.

pub mod adam;
mod snapshot;
mod train;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{frame_labels, ActivationDataset, PhonemeId, SplitAssignment};
use crate::error::{Error, Result};
use crate::pooling::{attention_pool_vjp, PoolingKind, PoolingSpec};
use crate::stats;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use snapshot::{read_probe, write_probe, PROBE_MAGIC};
pub use train::{Objective, TrainConfig, TrainHistory};

const LOCAL_BATCH: usize = 256;
const GLOBAL_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Local,
    Global,
}

/// Linear probe `W h + a`, with a pooling operator for the global kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub kind: ProbeKind,
    /// `P × D`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub pooling: Option<PoolingSpec>,
    /// Phonemes that take part in the loss and metrics (global kind).
    pub active: Vec<bool>,
}

impl ProbeModel {
    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Class probabilities for each row of `frames` (local kind).
    pub fn predict_frames(&self, frames: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = frames.dot(&self.weights.t()) + &self.bias;
        softmax_rows(&mut z);
        z
    }

    /// Per-phoneme presence probabilities for one utterance (global kind).
    pub fn predict_utterance(&self, seq: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let pooling = self.pooling.as_ref().unwrap_or(&PoolingSpec::Mean);
        let pooled = pooling.pool(seq)?;
        Ok((self.weights.dot(&pooled) + &self.bias).mapv(sigmoid))
    }
}

/// A probe at its best validation epoch, with the training trace and the
/// validation evaluation of that snapshot.
#[derive(Debug, Clone)]
pub struct TrainedProbe {
    pub model: ProbeModel,
    pub history: TrainHistory,
    pub validation: EvalReport,
    /// Phonemes present in all or none of the training utterances (global kind).
    pub excluded: Vec<PhonemeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub phoneme: PhonemeId,
    pub n: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub error_rate: f64,
    pub baseline_error: f64,
    pub rer: f64,
    pub per_class: Vec<ClassStats>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
}

/// Per-feature affine map to zero mean, unit variance over training frames.
/// Probes train in the standardized space and are folded back afterwards.
struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    fn fit<'r>(rows: impl Iterator<Item = ArrayView1<'r, f64>>, dim: usize) -> Self {
        let mut n = 0.0;
        let mut mean = Array1::<f64>::zeros(dim);
        let mut m2 = Array1::<f64>::zeros(dim);
        for row in rows {
            n += 1.0;
            let delta = &row - &mean;
            mean.scaled_add(1.0 / n, &delta);
            m2 += &(&delta * &(&row - &mean));
        }
        let scale = m2.mapv(|v| {
            let sd = (v / n.max(1.0)).sqrt();
            if sd > 1e-12 { sd } else { 1.0 }
        });
        Self { mean, scale }
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }

    /// Raw-space `(W, a)` equivalent to `(w, a)` acting on standardized input.
    fn fold(&self, w: ArrayView2<'_, f64>, a: ArrayView1<'_, f64>) -> (Array2<f64>, Array1<f64>) {
        let w_raw = &w / &self.scale;
        let a_raw = &a - &w_raw.dot(&self.mean);
        (w_raw, a_raw)
    }
}

fn init_weights(rng: &mut ChaCha8Rng, n_classes: usize, dim: usize) -> Vec<f64> {
    let bound = 1.0 / (dim as f64).sqrt();
    (0..n_classes * dim)
        .map(|_| rng.random_range(-bound..bound))
        .collect()
}

// ---------------------------------------------------------------- local probe

/// Frames stacked across utterances with one phoneme label each.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub x: Array2<f64>,
    pub labels: Vec<PhonemeId>,
}

impl FrameSet {
    /// Gathers every timestep of the given utterances of one layer.
    pub fn from_layer(dataset: &ActivationDataset, layer_id: usize, utterances: &[usize]) -> Result<Self> {
        let layer = dataset.layer(layer_id)?;
        let n: usize = utterances.iter().map(|&i| layer.sequences[i].nrows()).sum();
        let mut x = Array2::zeros((n, layer.dim));
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        for &i in utterances {
            let seq = layer.sequence(i);
            x.slice_mut(s![row..row + seq.nrows(), ..]).assign(&seq);
            row += seq.nrows();
            labels.extend(frame_labels(&dataset.utterances()[i], layer));
        }
        Ok(Self { x, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Mean softmax cross-entropy of a `P × D` linear probe. Parameters are laid
/// out as `[W (row-major), a]`.
pub struct LocalObjective<'a> {
    pub train: &'a FrameSet,
    pub val: &'a FrameSet,
    pub n_classes: usize,
}

impl LocalObjective<'_> {
    fn dim(&self) -> usize {
        self.train.x.ncols()
    }

    fn split_params<'p>(&self, params: &'p [f64]) -> (ArrayView2<'p, f64>, ArrayView1<'p, f64>) {
        let (p, d) = (self.n_classes, self.dim());
        (
            ArrayView2::from_shape((p, d), &params[..p * d]).expect("param layout"),
            ArrayView1::from(&params[p * d..p * d + p]),
        )
    }

    fn probs(&self, params: &[f64], x: ArrayView2<'_, f64>) -> Array2<f64> {
        let (w, a) = self.split_params(params);
        let mut z = x.dot(&w.t()) + &a;
        softmax_rows(&mut z);
        z
    }
}

impl Objective for LocalObjective<'_> {
    fn n_train(&self) -> usize {
        self.train.len()
    }

    fn loss_and_grad(&self, params: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let xb = self.train.x.select(Axis(0), batch);
        let mut dz = self.probs(params, xb.view());
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for (mut row, &i) in dz.rows_mut().into_iter().zip(batch) {
            let y = self.train.labels[i];
            loss -= row[y].max(f64::MIN_POSITIVE).ln();
            row[y] -= 1.0;
        }
        dz /= n;
        let gw = dz.t().dot(&xb);
        let ga = dz.sum_axis(Axis(0));
        let mut grad = gw.into_raw_vec_and_offset().0;
        grad.extend(ga.iter());
        (loss / n, grad)
    }

    fn train_loss(&self, params: &[f64]) -> f64 {
        let p = self.probs(params, self.train.x.view());
        let total: f64 = p
            .rows()
            .into_iter()
            .zip(&self.train.labels)
            .map(|(row, &y)| -row[y].max(f64::MIN_POSITIVE).ln())
            .sum();
        total / self.train.len() as f64
    }

    fn val_score(&self, params: &[f64]) -> f64 {
        let p = self.probs(params, self.val.x.view());
        let correct = p
            .rows()
            .into_iter()
            .zip(&self.val.labels)
            .filter(|(row, &y)| argmax(row.view()) == y)
            .count();
        correct as f64 / self.val.len() as f64
    }
}

fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Trains a frame-level probe on pre-gathered frame sets.
pub fn train_local(train: &FrameSet, val: &FrameSet, n_classes: usize, cfg: &TrainConfig) -> Result<TrainedProbe> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::NoData("empty training half"));
    }
    if val.is_empty() {
        return Err(Error::NoData("empty validation half"));
    }
    let first = train.labels[0];
    if train.labels.iter().all(|&l| l == first) {
        return Err(Error::SingleClass);
    }
    let dim = train.x.ncols();
    let std = Standardizer::fit(train.x.rows().into_iter(), dim);
    let z_train = FrameSet {
        x: std.apply(train.x.view()),
        labels: train.labels.clone(),
    };
    let z_val = FrameSet {
        x: std.apply(val.x.view()),
        labels: val.labels.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_weights(&mut rng, n_classes, dim);
    params.extend(std::iter::repeat_n(0.0, n_classes));
    let objective = LocalObjective {
        train: &z_train,
        val: &z_val,
        n_classes,
    };
    let batch = cfg.batch_size.unwrap_or(LOCAL_BATCH);
    let (best, history) = train::fit(&objective, params, batch, cfg, &mut rng);
    let (w, a) = objective.split_params(&best);
    let (weights, bias) = std.fold(w, a);
    let model = ProbeModel {
        kind: ProbeKind::Local,
        weights,
        bias,
        pooling: None,
        active: vec![true; n_classes],
    };
    let validation = eval_local(&model, val)?;
    Ok(TrainedProbe {
        model,
        history,
        validation,
        excluded: Vec::new(),
    })
}

/// Local diagnostic classifier for one layer: trains on the train half,
/// evaluates the best snapshot on the validation half.
pub fn train_local_probe(
    dataset: &ActivationDataset,
    layer_id: usize,
    split: &SplitAssignment,
    cfg: &TrainConfig,
) -> Result<TrainedProbe> {
    let (tr, va) = split.indices(dataset);
    let train = FrameSet::from_layer(dataset, layer_id, &tr)?;
    let val = FrameSet::from_layer(dataset, layer_id, &va)?;
    train_local(&train, &val, dataset.inventory().len(), cfg)
}

/// Frame error against the majority phoneme of the evaluated frames.
pub fn eval_local(model: &ProbeModel, data: &FrameSet) -> Result<EvalReport> {
    if data.x.ncols() != model.dim() {
        return Err(Error::DimMismatch {
            expected: model.dim(),
            found: data.x.ncols(),
        });
    }
    let probs = model.predict_frames(data.x.view());
    let predictions: Vec<PhonemeId> = probs.rows().into_iter().map(|r| argmax(r)).collect();
    score_predictions(&predictions, &data.labels, model.n_classes())
}

/// Error rate, majority baseline, RER and per-class counts of hard predictions.
pub fn score_predictions(predictions: &[PhonemeId], labels: &[PhonemeId], n_classes: usize) -> Result<EvalReport> {
    if labels.is_empty() {
        return Err(Error::NoData("nothing to evaluate"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    let mut per_class: Vec<ClassStats> = (0..n_classes)
        .map(|phoneme| ClassStats { phoneme, n: 0, errors: 0 })
        .collect();
    let mut errors = 0;
    for (&p, &y) in predictions.iter().zip(labels) {
        per_class[y].n += 1;
        if p != y {
            per_class[y].errors += 1;
            errors += 1;
        }
    }
    per_class.retain(|c| c.n > 0);
    let error_rate = errors as f64 / labels.len() as f64;
    let (baseline_error, _) = stats::majority_error(labels)?;
    Ok(EvalReport {
        error_rate,
        baseline_error,
        rer: stats::rer(error_rate, baseline_error)?,
        per_class,
    })
}

// --------------------------------------------------------------- global probe

/// Activation sequences of a set of utterances with their phoneme-presence
/// targets (`N × P`, entries 0 or 1).
#[derive(Debug, Clone)]
pub struct UtteranceSet<'a> {
    pub sequences: Vec<ArrayView2<'a, f64>>,
    pub presence: Array2<f64>,
}

impl<'a> UtteranceSet<'a> {
    pub fn from_layer(dataset: &'a ActivationDataset, layer_id: usize, utterances: &[usize]) -> Result<Self> {
        let layer = dataset.layer(layer_id)?;
        let p = dataset.inventory().len();
        let mut presence = Array2::zeros((utterances.len(), p));
        for (row, &i) in utterances.iter().enumerate() {
            for ph in dataset.utterances()[i].transcription() {
                presence[(row, ph)] = 1.0;
            }
        }
        Ok(Self {
            sequences: utterances.iter().map(|&i| layer.sequence(i)).collect(),
            presence,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Phonemes that are neither always nor never present.
    pub fn informative_phonemes(&self) -> Vec<bool> {
        let n = self.len() as f64;
        self.presence
            .sum_axis(Axis(0))
            .iter()
            .map(|&c| c > 0.0 && c < n)
            .collect()
    }
}

/// Summed binary cross-entropy over active phonemes, averaged over
/// utterances. Parameters are `[W (row-major), a]`, followed by the attention
/// vector `w` when pooling is attention.
pub struct GlobalObjective<'a> {
    pub train: &'a UtteranceSet<'a>,
    pub val: &'a UtteranceSet<'a>,
    pub n_classes: usize,
    pub pooling: PoolingKind,
    pub active: Vec<bool>,
    mean_train: Option<Array2<f64>>,
    mean_val: Option<Array2<f64>>,
}

fn mean_pooled(set: &UtteranceSet<'_>) -> Result<Array2<f64>> {
    let dim = set.sequences.first().map_or(0, |s| s.ncols());
    let mut out = Array2::zeros((set.len(), dim));
    for (mut row, seq) in out.rows_mut().into_iter().zip(&set.sequences) {
        row.assign(&crate::pooling::mean_pool(*seq)?);
    }
    Ok(out)
}

impl<'a> GlobalObjective<'a> {
    pub fn new(
        train: &'a UtteranceSet<'a>,
        val: &'a UtteranceSet<'a>,
        n_classes: usize,
        pooling: PoolingKind,
        active: Vec<bool>,
    ) -> Result<Self> {
        let (mean_train, mean_val) = match pooling {
            PoolingKind::Mean => (Some(mean_pooled(train)?), Some(mean_pooled(val)?)),
            PoolingKind::Attention => {
                for s in train.sequences.iter().chain(&val.sequences) {
                    if s.nrows() == 0 {
                        return Err(Error::EmptySequence);
                    }
                }
                (None, None)
            }
        };
        Ok(Self {
            train,
            val,
            n_classes,
            pooling,
            active,
            mean_train,
            mean_val,
        })
    }

    fn dim(&self) -> usize {
        self.train.sequences[0].ncols()
    }

    pub fn n_params(&self) -> usize {
        let (p, d) = (self.n_classes, self.dim());
        p * d + p + if self.pooling == PoolingKind::Attention { d } else { 0 }
    }

    fn split_params<'p>(
        &self,
        params: &'p [f64],
    ) -> (ArrayView2<'p, f64>, ArrayView1<'p, f64>, Option<ArrayView1<'p, f64>>) {
        let (p, d) = (self.n_classes, self.dim());
        let w = ArrayView2::from_shape((p, d), &params[..p * d]).expect("param layout");
        let a = ArrayView1::from(&params[p * d..p * d + p]);
        let att = (self.pooling == PoolingKind::Attention).then(|| ArrayView1::from(&params[p * d + p..p * d + p + d]));
        (w, a, att)
    }

    fn pooled(&self, params: &[f64], set: &UtteranceSet<'_>, cache: Option<&Array2<f64>>, i: usize) -> Array1<f64> {
        match cache {
            Some(c) => c.row(i).to_owned(),
            None => {
                let (_, _, att) = self.split_params(params);
                crate::pooling::attention_pool(set.sequences[i], att.expect("attention params"))
                    .expect("non-empty sequence")
            }
        }
    }

    fn item_loss(&self, z: &Array1<f64>, target: ArrayView1<'_, f64>) -> f64 {
        z.iter()
            .zip(target)
            .zip(&self.active)
            .filter(|(_, &on)| on)
            .map(|((&z, &y), _)| softplus(z) - y * z)
            .sum()
    }

    fn logits(&self, params: &[f64], pooled: &Array1<f64>) -> Array1<f64> {
        let (w, a, _) = self.split_params(params);
        w.dot(pooled) + a
    }

    fn decision_errors(&self, params: &[f64], set: &UtteranceSet<'_>, cache: Option<&Array2<f64>>) -> (usize, usize) {
        let mut errors = 0;
        let mut total = 0;
        for i in 0..set.len() {
            let z = self.logits(params, &self.pooled(params, set, cache, i));
            for j in 0..self.n_classes {
                if !self.active[j] {
                    continue;
                }
                total += 1;
                let predicted = z[j] >= 0.0;
                if predicted != (set.presence[(i, j)] > 0.5) {
                    errors += 1;
                }
            }
        }
        (errors, total)
    }
}

impl Objective for GlobalObjective<'_> {
    fn n_train(&self) -> usize {
        self.train.len()
    }

    fn loss_and_grad(&self, params: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let (p, d) = (self.n_classes, self.dim());
        let (w, _, att) = self.split_params(params);
        let mut gw = Array2::<f64>::zeros((p, d));
        let mut ga = Array1::<f64>::zeros(p);
        let mut gatt = Array1::<f64>::zeros(if att.is_some() { d } else { 0 });
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for &i in batch {
            let pooled = self.pooled(params, self.train, self.mean_train.as_ref(), i);
            let z = self.logits(params, &pooled);
            let target = self.train.presence.row(i);
            loss += self.item_loss(&z, target);
            let dz: Array1<f64> = z
                .iter()
                .zip(target)
                .zip(&self.active)
                .map(|((&z, &y), &on)| if on { (sigmoid(z) - y) / n } else { 0.0 })
                .collect();
            for j in 0..p {
                if dz[j] != 0.0 {
                    gw.row_mut(j).scaled_add(dz[j], &pooled);
                }
            }
            ga += &dz;
            if let Some(att) = att {
                let upstream = w.t().dot(&dz);
                let g = attention_pool_vjp(self.train.sequences[i], att, upstream.view()).expect("non-empty sequence");
                gatt += &g.w;
            }
        }
        let mut grad = gw.into_raw_vec_and_offset().0;
        grad.extend(ga.iter());
        grad.extend(gatt.iter());
        (loss / n, grad)
    }

    fn train_loss(&self, params: &[f64]) -> f64 {
        let total: f64 = (0..self.train.len())
            .map(|i| {
                let z = self.logits(params, &self.pooled(params, self.train, self.mean_train.as_ref(), i));
                self.item_loss(&z, self.train.presence.row(i))
            })
            .sum();
        total / self.train.len() as f64
    }

    fn val_score(&self, params: &[f64]) -> f64 {
        let (errors, total) = self.decision_errors(params, self.val, self.mean_val.as_ref());
        -(errors as f64) / total.max(1) as f64
    }
}

/// Trains a phoneme-presence probe on pooled activations. With attention
/// pooling the scoring vector is learned jointly with the classifier.
pub fn train_global<'a>(
    train: &'a UtteranceSet<'a>,
    val: &'a UtteranceSet<'a>,
    pooling: PoolingKind,
    cfg: &TrainConfig,
) -> Result<TrainedProbe> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::NoData("empty training half"));
    }
    if val.is_empty() {
        return Err(Error::NoData("empty validation half"));
    }
    let n_classes = train.presence.ncols();
    let active = train.informative_phonemes();
    if !active.iter().any(|&a| a) {
        return Err(Error::SingleClass);
    }
    let excluded: Vec<PhonemeId> = active.iter().enumerate().filter(|(_, &a)| !a).map(|(j, _)| j).collect();
    let dim = train.sequences[0].ncols();
    let std = Standardizer::fit(train.sequences.iter().flat_map(|seq| seq.rows().into_iter()), dim);
    let z_train_seqs: Vec<Array2<f64>> = train.sequences.iter().map(|seq| std.apply(*seq)).collect();
    let z_val_seqs: Vec<Array2<f64>> = val.sequences.iter().map(|seq| std.apply(*seq)).collect();
    let z_train = UtteranceSet {
        sequences: z_train_seqs.iter().map(|a| a.view()).collect(),
        presence: train.presence.clone(),
    };
    let z_val = UtteranceSet {
        sequences: z_val_seqs.iter().map(|a| a.view()).collect(),
        presence: val.presence.clone(),
    };
    let objective = GlobalObjective::new(&z_train, &z_val, n_classes, pooling, active.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_weights(&mut rng, n_classes, dim);
    params.resize(objective.n_params(), 0.0);
    let batch = cfg.batch_size.unwrap_or(GLOBAL_BATCH);
    let (best, history) = train::fit(&objective, params, batch, cfg, &mut rng);
    let (w, a, att) = objective.split_params(&best);
    let (weights, bias) = std.fold(w, a);
    let model = ProbeModel {
        kind: ProbeKind::Global,
        weights,
        bias,
        pooling: Some(match att {
            // softmax ignores the constant shift from centring
            Some(att) => PoolingSpec::Attention { w: &att / &std.scale },
            None => PoolingSpec::Mean,
        }),
        active,
    };
    let validation = eval_global(&model, val)?;
    Ok(TrainedProbe {
        model,
        history,
        validation,
        excluded,
    })
}

/// Global diagnostic classifier for one layer and pooling kind.
pub fn train_global_probe(
    dataset: &ActivationDataset,
    layer_id: usize,
    split: &SplitAssignment,
    pooling: PoolingKind,
    cfg: &TrainConfig,
) -> Result<TrainedProbe> {
    let (tr, va) = split.indices(dataset);
    let train = UtteranceSet::from_layer(dataset, layer_id, &tr)?;
    let val = UtteranceSet::from_layer(dataset, layer_id, &va)?;
    train_global(&train, &val, pooling, cfg)
}

/// Micro-averaged presence-decision error at threshold 0.5 over active
/// phonemes, against each phoneme's majority decision on the evaluated set.
pub fn eval_global(model: &ProbeModel, data: &UtteranceSet<'_>) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::NoData("nothing to evaluate"));
    }
    let p = model.n_classes();
    if data.presence.ncols() != p {
        return Err(Error::DimMismatch {
            expected: p,
            found: data.presence.ncols(),
        });
    }
    let mut per_class: Vec<ClassStats> = (0..p).map(|phoneme| ClassStats { phoneme, n: 0, errors: 0 }).collect();
    for (i, seq) in data.sequences.iter().enumerate() {
        if seq.ncols() != model.dim() {
            return Err(Error::DimMismatch {
                expected: model.dim(),
                found: seq.ncols(),
            });
        }
        let probs = model.predict_utterance(*seq)?;
        for j in (0..p).filter(|&j| model.active[j]) {
            per_class[j].n += 1;
            if (probs[j] >= 0.5) != (data.presence[(i, j)] > 0.5) {
                per_class[j].errors += 1;
            }
        }
    }
    let n = data.len();
    let mut baseline_errors = 0;
    for j in (0..p).filter(|&j| model.active[j]) {
        let present = data.presence.column(j).iter().filter(|&&v| v > 0.5).count();
        baseline_errors += present.min(n - present);
    }
    per_class.retain(|c| c.n > 0);
    let total: usize = per_class.iter().map(|c| c.n).sum();
    if total == 0 {
        return Err(Error::NoData("no active phonemes"));
    }
    let errors: usize = per_class.iter().map(|c| c.errors).sum();
    let error_rate = errors as f64 / total as f64;
    let baseline_error = baseline_errors as f64 / total as f64;
    Ok(EvalReport {
        error_rate,
        baseline_error,
        rer: stats::rer(error_rate, baseline_error)?,
        per_class,
    })
}

/// Evaluation input for either probe kind.
pub enum EvalData<'a> {
    Frames(&'a FrameSet),
    Utterances(&'a UtteranceSet<'a>),
}

pub fn eval_probe(model: &ProbeModel, data: EvalData<'_>) -> Result<EvalReport> {
    match (model.kind, data) {
        (ProbeKind::Local, EvalData::Frames(f)) => eval_local(model, f),
        (ProbeKind::Global, EvalData::Utterances(u)) => eval_global(model, u),
        _ => Err(Error::Config("probe kind does not match evaluation data".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_and_majority_predictions() {
        let labels = vec![0, 0, 1, 2, 0, 1];
        let perfect = score_predictions(&labels, &labels, 3).unwrap();
        assert_eq!(perfect.rer, 1.0);
        let constant = score_predictions(&[0; 6], &labels, 3).unwrap();
        assert_eq!(constant.error_rate, 0.5);
        assert_eq!(constant.rer, 0.0);
    }

    #[test]
    fn hand_counted_confusion() {
        // 12 items; wrong at positions 1, 4, 7, 10
        let labels = vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2];
        let preds = vec![0, 0, 2, 0, 2, 2, 0, 2, 2, 1, 1, 2];
        let r = score_predictions(&preds, &labels, 3).unwrap();
        assert_eq!(r.error_rate, 4.0 / 12.0);
        assert!((r.baseline_error - 8.0 / 12.0).abs() < 1e-15);
        assert!((r.rer - 0.5).abs() < 1e-12);
        let by_class: Vec<(usize, usize)> = r.per_class.iter().map(|c| (c.n, c.errors)).collect();
        assert_eq!(by_class, vec![(4, 1), (4, 3), (4, 0)]);
    }

    #[test]
    fn single_class_training_rejected() {
        let f = FrameSet { x: Array2::zeros((3, 2)), labels: vec![1, 1, 1] };
        assert!(matches!(train_local(&f, &f, 3, &TrainConfig::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn probability_outputs_are_normalized() {
        let model = ProbeModel {
            kind: ProbeKind::Local,
            weights: array![[1.0, -2.0], [0.5, 3.0], [-1.0, 0.0]],
            bias: array![0.1, -0.2, 0.3],
            pooling: None,
            active: vec![true; 3],
        };
        let p = model.predict_frames(array![[10.0, -3.0], [0.0, 0.0], [-400.0, 900.0]].view());
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        let g = ProbeModel { kind: ProbeKind::Global, pooling: Some(PoolingSpec::Mean), ..model };
        let probs = g.predict_utterance(array![[10.0, -3.0], [2.0, 1.0]].view()).unwrap();
        assert!(probs.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
    }
}
