//! Synthetic activation datasets with known ground truth.
//!
//! Phoneme streams are tiled with geometric span lengths. Layer 0 mixes a
//! phoneme-embedding signal with frame noise and a per-utterance nuisance
//! offset (speaker/channel); deeper layers follow one of two architectures:
//!
//! * `rnn_like`: `h_t = tanh(A h_{t-1} + B x_t)`, so each layer blends its own
//!   past state with the layer below and local context accumulates.
//! * `transformer_like`: `h_t = tanh(Σ_s a(t, s) B x_s)`, so every timestep is
//!   a mixture over the whole utterance from the first layer on.
//!
//! In the trained condition `B` amplifies the phoneme subspace and damps its
//! complement, `A` is a mild leak, and attention is local. In the random
//! condition `A` and `B` are Gaussian with spectral norm 0.9 and attention
//! logits are Gaussian.

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    subsampled_len, ActivationDataset, Condition, LayerActivations, PhonemeId, PhonemeInventory, Span, Utterance,
};
use crate::error::{Error, Result};
use crate::pooling::{mean_pool, softmax};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    RnnLike,
    TransformerLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_utterances: usize,
    /// Inclusive range of input frames per utterance.
    pub min_frames: usize,
    pub max_frames: usize,
    pub n_phonemes: usize,
    pub dim: usize,
    /// Layers above the input; the dataset holds `n_layers + 1` layers.
    pub n_layers: usize,
    pub architecture: Architecture,
    pub condition: Condition,
    /// Weight of the phoneme signal against noise at the input, in `[0, 1]`.
    pub encoding_strength: f64,
    /// Fraction of timesteps carrying the phoneme signal, in `(0, 1]`.
    pub signal_concentration: f64,
    /// How strongly confound vectors follow transcription content, in `[0, 1]`.
    pub confound_mix: f64,
    /// Confound dimension; 0 disables confound vectors.
    pub confound_dim: usize,
    /// Temporal subsampling of layers above the input.
    pub rate_divisor: usize,
    pub mean_span: f64,
    /// Phoneme-sequence templates shared between utterances; 0 draws every
    /// span independently.
    pub n_templates: usize,
    /// Probability that a span departs from its template.
    pub template_mutation: f64,
    /// Size of the per-utterance nuisance offset relative to frame noise.
    pub speaker_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_utterances: 200,
            min_frames: 40,
            max_frames: 120,
            n_phonemes: 24,
            dim: 32,
            n_layers: 5,
            architecture: Architecture::RnnLike,
            condition: Condition::Trained,
            encoding_strength: 0.5,
            signal_concentration: 1.0,
            confound_mix: 0.5,
            confound_dim: 16,
            rate_divisor: 1,
            mean_span: 5.0,
            n_templates: 4,
            template_mutation: 0.2,
            speaker_scale: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_utterances < 2 {
            return bad("n_utterances must be at least 2");
        }
        if self.min_frames == 0 || self.max_frames < self.min_frames {
            return bad("frame range must satisfy 1 <= min_frames <= max_frames");
        }
        if self.n_phonemes < 2 {
            return bad("n_phonemes must be at least 2");
        }
        if self.dim < self.n_phonemes + 1 {
            return bad("dim must exceed n_phonemes");
        }
        if self.n_layers < 2 {
            return bad("n_layers must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.encoding_strength) {
            return bad("encoding_strength must lie in [0, 1]");
        }
        if !(self.signal_concentration > 0.0 && self.signal_concentration <= 1.0) {
            return bad("signal_concentration must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.confound_mix) {
            return bad("confound_mix must lie in [0, 1]");
        }
        if self.rate_divisor == 0 {
            return bad("rate_divisor must be positive");
        }
        if !(self.mean_span >= 1.0) {
            return bad("mean_span must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.template_mutation) {
            return bad("template_mutation must lie in [0, 1]");
        }
        if !(self.speaker_scale >= 0.0) {
            return bad("speaker_scale must be non-negative");
        }
        Ok(())
    }
}

/// What the generator knows about each utterance.
#[derive(Debug, Clone)]
pub struct SynthTruth {
    /// Phoneme of every input frame.
    pub frame_phonemes: Vec<Vec<PhonemeId>>,
    /// Noise-free layer-0 signal component, `T × D` per utterance.
    pub clean_signal: Vec<Array2<f64>>,
    /// Which input frames carry the signal.
    pub informative: Vec<Vec<bool>>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: ActivationDataset,
    pub truth: SynthTruth,
}

// Independent random streams, so that e.g. the phoneme stream does not depend
// on the condition and trained/random datasets share their utterances.
const STREAM_PHONEMES: u64 = 1;
const STREAM_INPUT: u64 = 2;
const STREAM_EMBEDDING: u64 = 3;
const STREAM_WEIGHTS_RANDOM: u64 = 4;
const STREAM_CONFOUND: u64 = 5;
const STREAM_ATTENTION: u64 = 6;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn round_f32(a: Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v as f32 as f64)
}

pub fn inventory(n_phonemes: usize) -> PhonemeInventory {
    PhonemeInventory::new((0..n_phonemes).map(|i| format!("ph{i:02}")).collect()).expect("distinct labels")
}

/// Seeded utterances whose alignments tile each utterance with geometric
/// span lengths (minimum 1, mean `cfg.mean_span`). Each utterance follows
/// one of `cfg.n_templates` uniformly drawn phoneme sequences, each span
/// replaced by a uniform phoneme with probability `cfg.template_mutation`,
/// so phoneme ids stay uniform marginally.
pub fn gen_phoneme_stream(cfg: &SynthConfig) -> Result<Vec<Utterance>> {
    cfg.validate()?;
    let mut rng = rng(cfg.seed, STREAM_PHONEMES);
    let extra = Geometric::new(1.0 / cfg.mean_span).map_err(|e| Error::Config(e.to_string()))?;
    let templates: Vec<Vec<PhonemeId>> = (0..cfg.n_templates)
        .map(|_| (0..cfg.max_frames).map(|_| rng.random_range(0..cfg.n_phonemes)).collect())
        .collect();
    let mut utterances = Vec::with_capacity(cfg.n_utterances);
    for u in 0..cfg.n_utterances {
        let n = rng.random_range(cfg.min_frames..=cfg.max_frames);
        let template = (!templates.is_empty()).then(|| &templates[rng.random_range(0..templates.len())]);
        let mut alignment = Vec::new();
        let mut start = 0;
        while start < n {
            let len = (1 + extra.sample(&mut rng) as usize).min(n - start);
            let phoneme = match template {
                Some(t) if rng.random::<f64>() >= cfg.template_mutation => t[alignment.len()],
                _ => rng.random_range(0..cfg.n_phonemes),
            };
            alignment.push(Span {
                phoneme,
                start,
                end: start + len,
            });
            start += len;
        }
        utterances.push(Utterance {
            id: format!("utt{u:05}"),
            n_input_frames: n,
            alignment,
            confound: None,
        });
    }
    Ok(utterances)
}

/// Orthonormal basis (columns) of the span of the embedding rows.
fn row_space_basis(embedding: &Array2<f64>) -> Array2<f64> {
    let (p, d) = embedding.dim();
    let m = DMatrix::from_fn(d, p, |i, j| embedding[(j, i)]);
    let q = m.qr().q();
    Array2::from_shape_fn((d, p), |(i, j)| q[(i, j)])
}

fn spectral_normalize(m: Array2<f64>, target: f64) -> Array2<f64> {
    let (r, c) = m.dim();
    let dm = DMatrix::from_fn(r, c, |i, j| m[(i, j)]);
    let top = dm.singular_values().max();
    m * (target / top)
}

const TRAINED_GAIN: f64 = 2.0;
const TRAINED_LEAK: f64 = 0.05;
const TRAINED_RECURRENCE: f64 = 0.3;
const TRAINED_LOCALITY: f64 = 2.0;
const RANDOM_SPECTRAL_NORM: f64 = 0.9;
const RANDOM_ATTENTION_SCALE: f64 = 1.0;

struct LayerWeights {
    recurrent: Array2<f64>,
    input: Array2<f64>,
}

fn layer_weights(cfg: &SynthConfig, projection: &Array2<f64>) -> Vec<LayerWeights> {
    let d = cfg.dim;
    match cfg.condition {
        Condition::Trained => {
            let identity = Array2::<f64>::eye(d);
            let input = projection * TRAINED_GAIN + &((&identity - projection) * TRAINED_LEAK);
            (0..cfg.n_layers)
                .map(|_| LayerWeights {
                    recurrent: &identity * TRAINED_RECURRENCE,
                    input: input.clone(),
                })
                .collect()
        }
        Condition::Random => {
            let mut r = rng(cfg.seed, STREAM_WEIGHTS_RANDOM);
            (0..cfg.n_layers)
                .map(|_| LayerWeights {
                    recurrent: spectral_normalize(gaussian(&mut r, d, d), RANDOM_SPECTRAL_NORM),
                    input: spectral_normalize(gaussian(&mut r, d, d), RANDOM_SPECTRAL_NORM),
                })
                .collect()
        }
    }
}

/// Averages consecutive blocks of `k` rows; a partial last block is averaged
/// over the rows it has.
fn subsample(x: ArrayView2<'_, f64>, k: usize) -> Array2<f64> {
    if k == 1 {
        return x.to_owned();
    }
    let t = subsampled_len(x.nrows(), k);
    let mut out = Array2::zeros((t, x.ncols()));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let block = x.slice(s![i * k..((i + 1) * k).min(x.nrows()), ..]);
        row.assign(&block.mean_axis(Axis(0)).expect("non-empty block"));
    }
    out
}

fn rnn_layer(x: ArrayView2<'_, f64>, w: &LayerWeights) -> Array2<f64> {
    let drive = x.dot(&w.input.t());
    let mut h = Array2::zeros(drive.raw_dim());
    let mut prev = Array1::zeros(drive.ncols());
    for t in 0..drive.nrows() {
        let pre = w.recurrent.dot(&prev) + drive.row(t);
        let cur = pre.mapv(f64::tanh);
        h.row_mut(t).assign(&cur);
        prev = cur;
    }
    h
}

fn transformer_layer(x: ArrayView2<'_, f64>, w: &LayerWeights, cfg: &SynthConfig, attn_rng: &mut ChaCha8Rng) -> Array2<f64> {
    let values = x.dot(&w.input.t());
    let t_len = values.nrows();
    let mut h = Array2::zeros(values.raw_dim());
    for t in 0..t_len {
        let logits: Array1<f64> = match cfg.condition {
            Condition::Trained => (0..t_len).map(|s| -TRAINED_LOCALITY * (t as f64 - s as f64).abs()).collect(),
            Condition::Random => (0..t_len)
                .map(|_| { let z: f64 = StandardNormal.sample(attn_rng); RANDOM_ATTENTION_SCALE * z })
                .collect(),
        };
        let alpha = softmax(logits.view());
        h.row_mut(t).assign(&alpha.dot(&values).mapv(f64::tanh));
    }
    h
}

/// Builds the layered activation dataset for `stream` under `cfg`.
pub fn gen_activations(stream: Vec<Utterance>, cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let (p, d) = (cfg.n_phonemes, cfg.dim);
    let mut emb_rng = rng(cfg.seed, STREAM_EMBEDDING);
    let embedding = gaussian(&mut emb_rng, p, d);
    let salience = gaussian(&mut emb_rng, 1, d).row(0).to_owned();
    let basis = row_space_basis(&embedding);
    let projection = basis.dot(&basis.t());
    let complement = Array2::<f64>::eye(d) - &projection;

    let rho = cfg.encoding_strength;
    let concentrated = cfg.signal_concentration < 1.0;
    let mut input_rng = rng(cfg.seed, STREAM_INPUT);
    let mut truth = SynthTruth {
        frame_phonemes: Vec::new(),
        clean_signal: Vec::new(),
        informative: Vec::new(),
    };
    let mut layer0 = Vec::with_capacity(stream.len());
    for u in &stream {
        let n = u.n_input_frames;
        let phonemes: Vec<PhonemeId> = (0..n).map(|f| u.phoneme_at(f).expect("tiled")).collect();
        let informative: Vec<bool> = (0..n)
            .map(|_| !concentrated || input_rng.random::<f64>() < cfg.signal_concentration)
            .collect();
        let speaker: Array1<f64> = complement.dot(&gaussian(&mut input_rng, 1, d).row(0)) * cfg.speaker_scale;
        let noise = gaussian(&mut input_rng, n, d);
        let mut clean = Array2::zeros((n, d));
        for f in 0..n {
            if informative[f] {
                clean.row_mut(f).assign(&embedding.row(phonemes[f]));
                if concentrated {
                    clean.row_mut(f).scaled_add(1.0, &salience);
                }
            }
        }
        let mut x = &clean * rho + &((noise + &speaker) * (1.0 - rho));
        if rho == 1.0 && concentrated {
            // keep uninformative frames away from the zero vector
            for f in (0..n).filter(|&f| !informative[f]) {
                x.row_mut(f).assign(&(&speaker + &gaussian(&mut input_rng, 1, d).row(0)).mapv(|v| 0.1 * v));
            }
        }
        layer0.push(round_f32(x));
        truth.frame_phonemes.push(phonemes);
        truth.clean_signal.push(clean);
        truth.informative.push(informative);
    }

    let weights = layer_weights(cfg, &projection);
    let mut attn_rng = rng(cfg.seed, STREAM_ATTENTION);
    let mut layers = vec![LayerActivations {
        layer_id: 0,
        name: "input".into(),
        dim: d,
        rate_divisor: 1,
        file: "layer_00.actv".into(),
        sequences: layer0,
    }];
    for (l, w) in weights.iter().enumerate() {
        let below = &layers[l].sequences;
        let sequences: Vec<Array2<f64>> = below
            .iter()
            .map(|x| {
                let x = if l == 0 { subsample(x.view(), cfg.rate_divisor) } else { x.clone() };
                round_f32(match cfg.architecture {
                    Architecture::RnnLike => rnn_layer(x.view(), w),
                    Architecture::TransformerLike => transformer_layer(x.view(), w, cfg, &mut attn_rng),
                })
            })
            .collect();
        layers.push(LayerActivations {
            layer_id: l + 1,
            name: format!(
                "{}{}",
                match cfg.architecture {
                    Architecture::RnnLike => "rnn",
                    Architecture::TransformerLike => "attn",
                },
                l + 1
            ),
            dim: d,
            rate_divisor: cfg.rate_divisor,
            file: format!("layer_{:02}.actv", l + 1),
            sequences,
        });
    }

    let mut utterances = stream;
    if cfg.confound_dim > 0 {
        attach_confounds(&mut utterances, cfg);
    }
    let dataset = ActivationDataset::new(inventory(p), utterances, layers, cfg.condition)?;
    Ok(SynthOutput { dataset, truth })
}

/// Confound vectors: a fixed random projection of each utterance's phoneme
/// histogram, blended with independent noise at `1 - confound_mix`.
fn attach_confounds(utterances: &mut [Utterance], cfg: &SynthConfig) {
    let mut r = rng(cfg.seed, STREAM_CONFOUND);
    let c = cfg.confound_dim;
    let projection = gaussian(&mut r, c, cfg.n_phonemes);
    let gamma = cfg.confound_mix;
    for u in utterances {
        let mut hist = Array1::<f64>::zeros(cfg.n_phonemes);
        for s in &u.alignment {
            hist[s.phoneme] += 1.0;
        }
        let content = projection.dot(&hist);
        let content = &content / content.dot(&content).sqrt().max(1e-12);
        let noise = gaussian(&mut r, 1, c).row(0).to_owned();
        let noise = &noise / noise.dot(&noise).sqrt().max(1e-12);
        let v = content * gamma + noise * (1.0 - gamma);
        u.confound = Some(v.iter().map(|&x| x as f32 as f64).collect());
    }
}

/// Stream plus activations in one call.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    gen_activations(gen_phoneme_stream(cfg)?, cfg)
}

/// Mean over features of the across-utterance standard deviation of
/// mean-pooled activations.
pub fn pooled_std(dataset: &ActivationDataset, layer_id: usize) -> Result<f64> {
    let layer = dataset.layer(layer_id)?;
    let pooled: Vec<Array1<f64>> = layer.sequences.iter().map(|s| mean_pool(s.view())).collect::<Result<_>>()?;
    let stacked = Array2::from_shape_fn((pooled.len(), layer.dim), |(i, j)| pooled[i][j]);
    Ok(mean_feature_std(stacked.view()))
}

/// Mean over features of the standard deviation across all frames.
pub fn frame_std(dataset: &ActivationDataset, layer_id: usize) -> Result<f64> {
    let layer = dataset.layer(layer_id)?;
    let views: Vec<ArrayView2<'_, f64>> = layer.sequences.iter().map(|s| s.view()).collect();
    let stacked = ndarray::concatenate(Axis(0), &views).map_err(|_| Error::NoData("layer without frames"))?;
    Ok(mean_feature_std(stacked.view()))
}

fn mean_feature_std(m: ArrayView2<'_, f64>) -> f64 {
    m.std_axis(Axis(0), 0.0).mean().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            n_utterances: 6,
            min_frames: 10,
            max_frames: 30,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn single_utterance_tiles_exactly() {
        let cfg = SynthConfig { n_utterances: 2, min_frames: 10, max_frames: 10, ..SynthConfig::default() };
        let stream = gen_phoneme_stream(&cfg).unwrap();
        let u = &stream[0];
        assert_eq!(u.alignment.first().unwrap().start, 0);
        assert_eq!(u.alignment.last().unwrap().end, 10);
        for pair in u.alignment.windows(2) {
            assert_eq!(pair[0].end, pair[1].start);
        }
    }

    #[test]
    fn stream_is_seeded() {
        assert_eq!(gen_phoneme_stream(&small(4)).unwrap(), gen_phoneme_stream(&small(4)).unwrap());
        assert_ne!(gen_phoneme_stream(&small(4)).unwrap(), gen_phoneme_stream(&small(5)).unwrap());
    }

    #[test]
    fn both_phonemes_occur_in_long_stream() {
        let cfg = SynthConfig { n_utterances: 2, n_phonemes: 2, dim: 4, min_frames: 200, max_frames: 200, ..SynthConfig::default() };
        let u = &gen_phoneme_stream(&cfg).unwrap()[0];
        let t = u.transcription();
        assert!(t.contains(&0) && t.contains(&1));
    }

    #[test]
    fn unmutated_single_template_gives_shared_prefixes() {
        let cfg = SynthConfig { n_templates: 1, template_mutation: 0.0, ..small(3) };
        let texts: Vec<Vec<PhonemeId>> = gen_phoneme_stream(&cfg).unwrap().iter().map(|u| u.transcription()).collect();
        for a in &texts {
            for b in &texts {
                let k = a.len().min(b.len());
                assert_eq!(a[..k], b[..k]);
            }
        }
    }

    #[test]
    fn span_lengths_have_requested_mean() {
        let cfg = SynthConfig { n_utterances: 50, min_frames: 400, max_frames: 400, ..SynthConfig::default() };
        let spans: Vec<usize> = gen_phoneme_stream(&cfg)
            .unwrap()
            .iter()
            .flat_map(|u| u.alignment[..u.alignment.len() - 1].iter().map(|s| s.end - s.start).collect::<Vec<_>>())
            .collect();
        let mean = spans.iter().sum::<usize>() as f64 / spans.len() as f64;
        assert!((mean - 5.0).abs() < 0.25, "mean span {mean}");
        assert!(spans.iter().all(|&l| l >= 1));
    }

    #[test]
    fn conditions_share_utterances_and_input() {
        let t = generate(&small(2)).unwrap().dataset;
        let r = generate(&SynthConfig { condition: Condition::Random, ..small(2) }).unwrap().dataset;
        assert_eq!(t.utterances(), r.utterances());
        assert_eq!(t.layers()[0].sequences, r.layers()[0].sequences);
        assert_ne!(t.layers()[1].sequences, r.layers()[1].sequences);
    }

    #[test]
    fn subsampled_layers_match_divisor() {
        for arch in [Architecture::RnnLike, Architecture::TransformerLike] {
            let cfg = SynthConfig { rate_divisor: 3, architecture: arch, ..small(1) };
            let ds = generate(&cfg).unwrap().dataset;
            for (u, seq) in ds.utterances().iter().zip(&ds.layers()[2].sequences) {
                assert_eq!(seq.nrows(), u.n_input_frames.div_ceil(3));
            }
        }
    }

    #[test]
    fn pooled_std_of_constant_layer_is_zero() {
        let mut ds = generate(&small(0)).unwrap().dataset;
        let layers: Vec<LayerActivations> = ds
            .layers()
            .iter()
            .map(|l| LayerActivations { sequences: l.sequences.iter().map(|s| Array2::from_elem(s.raw_dim(), 0.7)).collect(), ..l.clone() })
            .collect();
        ds = ActivationDataset::new(ds.inventory().clone(), ds.utterances().to_vec(), layers, ds.condition()).unwrap();
        assert!(pooled_std(&ds, 1).unwrap() < 1e-12);
        assert!(frame_std(&ds, 1).unwrap() < 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SynthConfig { n_layers: 1, ..SynthConfig::default() }.validate().is_err());
        assert!(SynthConfig { signal_concentration: 0.0, ..SynthConfig::default() }.validate().is_err());
        assert!(SynthConfig { encoding_strength: 1.5, ..SynthConfig::default() }.validate().is_err());
    }
}
