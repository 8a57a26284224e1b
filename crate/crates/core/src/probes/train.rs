use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use crate::error::{Error, Result};

/// Optimization protocol for diagnostic classifiers: Adam, learning rate
/// decayed on validation plateaus, early stopping, best-epoch snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub plateau_patience: usize,
    pub stop_patience: usize,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    /// Frames (local probe) or utterances (global probe) per minibatch;
    /// `None` picks 256 or 64 respectively.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            initial_lr: 1e-3,
            lr_decay: 0.1,
            plateau_patience: 10,
            stop_patience: 50,
            max_epochs: 500,
            adam: AdamConfig::default(),
            batch_size: None,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.initial_lr >= 0.0) {
            return bad("initial_lr must be non-negative");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if self.plateau_patience == 0 || self.stop_patience == 0 || self.max_epochs == 0 {
            return bad("patiences and max_epochs must be positive");
        }
        if self.stop_patience < self.plateau_patience {
            return bad("stop_patience must be >= plateau_patience");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// Per-epoch trace of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_score: Vec<f64>,
    pub lr: Vec<f64>,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.val_score.len()
    }

    pub fn best_score(&self) -> f64 {
        self.val_score[self.best_epoch]
    }
}

/// A differentiable training objective over a flat parameter vector.
pub trait Objective {
    fn n_train(&self) -> usize;
    /// Mean loss over `batch` and its gradient.
    fn loss_and_grad(&self, params: &[f64], batch: &[usize]) -> (f64, Vec<f64>);
    /// Mean loss over the whole training set.
    fn train_loss(&self, params: &[f64]) -> f64;
    /// Higher is better.
    fn val_score(&self, params: &[f64]) -> f64;
}

/// Runs the epoch loop and returns the parameters of the best validation epoch.
pub(crate) fn fit<O: Objective>(
    objective: &O,
    mut params: Vec<f64>,
    batch_size: usize,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, TrainHistory) {
    let mut state = AdamState::new(params.len());
    let mut lr = cfg.initial_lr;
    let mut order: Vec<usize> = (0..objective.n_train()).collect();
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_score: Vec::new(),
        lr: Vec::new(),
        best_epoch: 0,
    };
    let mut best = params.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut since_best = 0;
    let mut since_decay = 0;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(rng);
        for batch in order.chunks(batch_size) {
            let (_, grad) = objective.loss_and_grad(&params, batch);
            adam_step(&mut params, &grad, &mut state, lr, &cfg.adam).expect("gradient matches params");
        }
        history.train_loss.push(objective.train_loss(&params));
        history.lr.push(lr);
        let score = objective.val_score(&params);
        history.val_score.push(score);
        if score > best_score {
            best_score = score;
            best.clone_from(&params);
            history.best_epoch = epoch;
            since_best = 0;
            since_decay = 0;
        } else {
            since_best += 1;
            since_decay += 1;
            if since_best >= cfg.stop_patience {
                break;
            }
            if since_decay >= cfg.plateau_patience {
                lr *= cfg.lr_decay;
                since_decay = 0;
            }
        }
    }
    (best, history)
}
