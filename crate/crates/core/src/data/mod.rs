//! Activation datasets: phoneme inventory, aligned utterances, and per-layer
//! activation sequences, plus the on-disk manifest and `ACTV` layer files.

pub mod framing;
mod io;

use std::collections::HashSet;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, write_dataset, LAYER_MAGIC};

pub type PhonemeId = usize;

/// Ordered phoneme labels; a label's position is its id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
}

impl PhonemeInventory {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "inventory needs at least 2 symbols, found {}",
                symbols.len()
            )));
        }
        let mut seen = HashSet::new();
        for s in &symbols {
            if s.is_empty() {
                return Err(Error::InvalidDataset("empty phoneme label".into()));
            }
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate phoneme label {s:?}")));
            }
        }
        Ok(Self { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, id: PhonemeId) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn id_of(&self, label: &str) -> Option<PhonemeId> {
        self.symbols.iter().position(|s| s == label)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }
}

/// Half-open span `[start, end)` of input frames labeled with one phoneme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub phoneme: PhonemeId,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub n_input_frames: usize,
    /// Spans tile `[0, n_input_frames)` in order.
    pub alignment: Vec<Span>,
    /// Optional confound features (e.g. image embeddings of the paired stimulus).
    pub confound: Option<Vec<f64>>,
}

impl Utterance {
    /// Phoneme ids of the alignment spans, in order.
    pub fn transcription(&self) -> Vec<PhonemeId> {
        self.alignment.iter().map(|s| s.phoneme).collect()
    }

    /// Phoneme covering input frame `frame`, or `None` past the end.
    pub fn phoneme_at(&self, frame: usize) -> Option<PhonemeId> {
        let i = self.alignment.partition_point(|s| s.end <= frame);
        self.alignment
            .get(i)
            .filter(|s| s.start <= frame)
            .map(|s| s.phoneme)
    }

    fn validate(&self, inventory_size: usize) -> Result<()> {
        let mut cursor = 0;
        for span in &self.alignment {
            if span.end > self.n_input_frames {
                return Err(Error::AlignmentOutOfRange {
                    utterance: self.id.clone(),
                    start: span.start,
                    end: span.end,
                    n_input_frames: self.n_input_frames,
                });
            }
            if span.phoneme >= inventory_size {
                return Err(Error::InvalidAlignment {
                    utterance: self.id.clone(),
                    detail: format!("phoneme id {} outside inventory", span.phoneme),
                });
            }
            if span.start >= span.end {
                return Err(Error::InvalidAlignment {
                    utterance: self.id.clone(),
                    detail: format!("empty span [{}, {})", span.start, span.end),
                });
            }
            if span.start != cursor {
                return Err(Error::InvalidAlignment {
                    utterance: self.id.clone(),
                    detail: format!(
                        "span starts at {} but previous span ends at {cursor}",
                        span.start
                    ),
                });
            }
            cursor = span.end;
        }
        if cursor != self.n_input_frames {
            return Err(Error::InvalidAlignment {
                utterance: self.id.clone(),
                detail: format!("spans cover {cursor} of {} frames", self.n_input_frames),
            });
        }
        if let Some(c) = &self.confound {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "non-finite confound value in utterance {}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Number of layer timesteps covering `n_input_frames` at a subsampling divisor.
pub fn subsampled_len(n_input_frames: usize, rate_divisor: usize) -> usize {
    n_input_frames.div_ceil(rate_divisor)
}

/// Activations of one layer for every utterance of a dataset, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    /// 0 is the model input.
    pub layer_id: usize,
    pub name: String,
    pub dim: usize,
    pub rate_divisor: usize,
    /// File name of the layer's `ACTV` file, relative to the manifest.
    pub file: String,
    /// One `T_u × dim` matrix per utterance.
    pub sequences: Vec<Array2<f64>>,
}

impl LayerActivations {
    pub fn sequence(&self, utterance_index: usize) -> ArrayView2<'_, f64> {
        self.sequences[utterance_index].view()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Trained,
    Random,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Trained => "trained",
            Condition::Random => "random",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trained" => Ok(Condition::Trained),
            "random" => Ok(Condition::Random),
            other => Err(Error::Config(format!("unknown condition {other:?}"))),
        }
    }
}

/// A validated, immutable analysis input.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDataset {
    inventory: PhonemeInventory,
    utterances: Vec<Utterance>,
    layers: Vec<LayerActivations>,
    condition: Condition,
}

impl ActivationDataset {
    /// Builds a dataset, checking every structural invariant.
    pub fn new(
        inventory: PhonemeInventory,
        utterances: Vec<Utterance>,
        layers: Vec<LayerActivations>,
        condition: Condition,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidDataset("dataset has no layers".into()));
        }
        let mut ids = HashSet::new();
        for u in &utterances {
            if !ids.insert(u.id.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate utterance id {:?}", u.id)));
            }
            u.validate(inventory.len())?;
        }
        let mut confound_dim = None;
        for u in &utterances {
            if let Some(c) = &u.confound {
                match confound_dim {
                    None => confound_dim = Some(c.len()),
                    Some(d) if d != c.len() => {
                        return Err(Error::InvalidDataset(format!(
                            "confound of utterance {} has dim {}, expected {d}",
                            u.id,
                            c.len()
                        )))
                    }
                    _ => {}
                }
            }
        }
        let mut layer_ids = HashSet::new();
        for layer in &layers {
            if !layer_ids.insert(layer.layer_id) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate layer id {}",
                    layer.layer_id
                )));
            }
            validate_layer(layer, &utterances)?;
        }
        Ok(Self {
            inventory,
            utterances,
            layers,
            condition,
        })
    }

    pub fn inventory(&self) -> &PhonemeInventory {
        &self.inventory
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn layers(&self) -> &[LayerActivations] {
        &self.layers
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn layer(&self, layer_id: usize) -> Result<&LayerActivations> {
        self.layers
            .iter()
            .find(|l| l.layer_id == layer_id)
            .ok_or(Error::UnknownLayer(layer_id))
    }

    pub fn layer_ids(&self) -> Vec<usize> {
        let mut ids: Vec<_> = self.layers.iter().map(|l| l.layer_id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn has_confounds(&self) -> bool {
        !self.utterances.is_empty() && self.utterances.iter().all(|u| u.confound.is_some())
    }
}

fn validate_layer(layer: &LayerActivations, utterances: &[Utterance]) -> Result<()> {
    let mismatch = |utterance: &str, detail: String| Error::ShapeMismatch {
        layer_id: layer.layer_id,
        utterance: utterance.to_string(),
        detail,
    };
    if layer.rate_divisor == 0 {
        return Err(mismatch("-", "rate_divisor must be positive".into()));
    }
    if layer.sequences.len() != utterances.len() {
        return Err(mismatch(
            "-",
            format!(
                "{} sequences for {} utterances",
                layer.sequences.len(),
                utterances.len()
            ),
        ));
    }
    for (u, seq) in utterances.iter().zip(&layer.sequences) {
        let expected = subsampled_len(u.n_input_frames, layer.rate_divisor);
        if seq.nrows() != expected {
            return Err(mismatch(
                &u.id,
                format!(
                    "T = {} but ceil({} / {}) = {expected}",
                    seq.nrows(),
                    u.n_input_frames,
                    layer.rate_divisor
                ),
            ));
        }
        if seq.ncols() != layer.dim {
            return Err(mismatch(
                &u.id,
                format!("D = {} but layer dim is {}", seq.ncols(), layer.dim),
            ));
        }
        if let Some(((t, d), _)) = seq.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                layer_id: layer.layer_id,
                utterance: u.id.clone(),
                t,
                d,
            });
        }
    }
    Ok(())
}

/// Phoneme label of every timestep of `layer` for one utterance.
///
/// Timestep `t` covers input frames `[t*k, (t+1)*k)` for divisor `k`; it takes
/// the label of the frame at `floor((t + 0.5) * k)`, clamped to the last frame
/// when the final block is partial.
pub fn frame_labels(utterance: &Utterance, layer: &LayerActivations) -> Vec<PhonemeId> {
    frame_labels_at_rate(utterance, layer.rate_divisor)
}

/// [`frame_labels`] for an explicit subsampling divisor.
pub fn frame_labels_at_rate(utterance: &Utterance, rate_divisor: usize) -> Vec<PhonemeId> {
    let n = utterance.n_input_frames;
    (0..subsampled_len(n, rate_divisor))
        .map(|t| {
            let center = (((t as f64) + 0.5) * rate_divisor as f64).floor() as usize;
            utterance
                .phoneme_at(center.min(n - 1))
                .expect("alignment tiles the utterance")
        })
        .collect()
}

/// Train/validation partition of utterance ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub seed: u64,
    /// Sorted.
    pub train_ids: Vec<String>,
    /// Sorted.
    pub val_ids: Vec<String>,
}

impl SplitAssignment {
    /// Dataset positions of the train and validation utterances, in dataset order.
    pub fn indices(&self, dataset: &ActivationDataset) -> (Vec<usize>, Vec<usize>) {
        let train: HashSet<&str> = self.train_ids.iter().map(String::as_str).collect();
        let val: HashSet<&str> = self.val_ids.iter().map(String::as_str).collect();
        let mut tr = Vec::new();
        let mut va = Vec::new();
        for (i, u) in dataset.utterances().iter().enumerate() {
            if train.contains(u.id.as_str()) {
                tr.push(i);
            } else if val.contains(u.id.as_str()) {
                va.push(i);
            }
        }
        (tr, va)
    }
}

/// Seeded half split: `floor(N/2)` utterances train, the rest validate.
///
/// Depends only on the seed and the sorted id set, never on storage order.
pub fn split_half(dataset: &ActivationDataset, seed: u64) -> Result<SplitAssignment> {
    let ids: Vec<&str> = dataset.utterances().iter().map(|u| u.id.as_str()).collect();
    split_ids(&ids, seed)
}

pub(crate) fn split_ids(ids: &[&str], seed: u64) -> Result<SplitAssignment> {
    if ids.len() < 2 {
        return Err(Error::TooFewUtterances(ids.len()));
    }
    let mut sorted: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
    sorted.sort();
    let mut shuffled = sorted.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = sorted.len() / 2;
    let mut train_ids = shuffled[..n_train].to_vec();
    let mut val_ids = shuffled[n_train..].to_vec();
    train_ids.sort();
    val_ids.sort();
    Ok(SplitAssignment {
        seed,
        train_ids,
        val_ids,
    })
}
