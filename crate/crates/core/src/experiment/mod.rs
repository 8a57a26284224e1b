//! Method grids over layers, conditions and seeds.
//!
//! A plan names one dataset per condition; every (method, layer, condition,
//! seed) cell becomes one [`ReportRow`]. Cells run in parallel and failures
//! are recorded in the row instead of aborting the grid.

mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, split_half, ActivationDataset, Condition, SplitAssignment};
use crate::error::{Error, Result};
use crate::pooling::{PoolingKind, PoolingSpec};
use crate::probes::{train_global_probe, train_local_probe, TrainConfig};
use crate::rsa::{self, AttentionRsaConfig, Scope, DEFAULT_LOCAL_PAIRS};

pub use report::{emit_csv, emit_svg, read_csv, read_rows, render_svg, write_rows, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DiagLocal,
    DiagGlobalMean,
    DiagGlobalAttn,
    RsaLocal,
    RsaGlobalMean,
    RsaGlobalAttn,
    RsaGlobalPartial,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::DiagLocal,
        Method::DiagGlobalMean,
        Method::DiagGlobalAttn,
        Method::RsaLocal,
        Method::RsaGlobalMean,
        Method::RsaGlobalAttn,
        Method::RsaGlobalPartial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::DiagLocal => "diag_local",
            Method::DiagGlobalMean => "diag_global_mean",
            Method::DiagGlobalAttn => "diag_global_attn",
            Method::RsaLocal => "rsa_local",
            Method::RsaGlobalMean => "rsa_global_mean",
            Method::RsaGlobalAttn => "rsa_global_attn",
            Method::RsaGlobalPartial => "rsa_global_partial",
        }
    }

    pub fn scope(self) -> Scope {
        match self {
            Method::DiagLocal | Method::RsaLocal => Scope::Local,
            _ => Scope::Global,
        }
    }

    pub fn pooling(self) -> Option<PoolingKind> {
        match self {
            Method::DiagLocal | Method::RsaLocal => None,
            Method::DiagGlobalAttn | Method::RsaGlobalAttn => Some(PoolingKind::Attention),
            _ => Some(PoolingKind::Mean),
        }
    }

    pub fn score_kind(self) -> ScoreKind {
        match self {
            Method::DiagLocal | Method::DiagGlobalMean | Method::DiagGlobalAttn => ScoreKind::Rer,
            Method::RsaGlobalPartial => ScoreKind::SqrtAbsPartialR2,
            _ => ScoreKind::PearsonR,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Plan(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Rer,
    PearsonR,
    SqrtAbsPartialR2,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Rer => "rer",
            ScoreKind::PearsonR => "pearson_r",
            ScoreKind::SqrtAbsPartialR2 => "sqrt_abs_partial_r2",
        }
    }
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_local_pairs() -> usize {
    DEFAULT_LOCAL_PAIRS
}

/// What to run. Dataset paths are resolved against the plan file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub datasets: BTreeMap<Condition, PathBuf>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// All layers of the datasets when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
    #[serde(default = "default_local_pairs")]
    pub local_pairs: usize,
    /// `floor(n/2)` over the validation half when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_pairs: Option<usize>,
    /// Probe optimization; the seed is replaced by each cell's seed.
    #[serde(default)]
    pub train: TrainConfig,
    /// Attention-RSA optimization; seed and pair count come from the cell.
    #[serde(default)]
    pub attention_rsa: AttentionRsaConfig,
    /// Off by default so reruns produce identical bytes.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentPlan {
    pub fn new(datasets: BTreeMap<Condition, PathBuf>) -> Self {
        Self {
            datasets,
            methods: default_methods(),
            seeds: default_seeds(),
            layers: None,
            local_pairs: DEFAULT_LOCAL_PAIRS,
            global_pairs: None,
            train: TrainConfig::default(),
            attention_rsa: AttentionRsaConfig::default(),
            record_wall_time: false,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut plan: ExperimentPlan =
            serde_json::from_str(&text).map_err(|e| Error::Plan(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in plan.datasets.values_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Plan(m.to_string()));
        if self.datasets.is_empty() {
            return bad("no datasets");
        }
        if self.methods.is_empty() {
            return bad("no methods");
        }
        if self.seeds.is_empty() {
            return bad("no seeds");
        }
        if self.layers.as_ref().is_some_and(|l| l.is_empty()) {
            return bad("empty layer list");
        }
        if self.local_pairs < 2 || self.global_pairs.is_some_and(|n| n < 2) {
            return bad("pair counts must be at least 2");
        }
        self.train.validate().map_err(|e| Error::Plan(e.to_string()))?;
        Ok(())
    }

    /// Checks the plan against its loaded datasets and returns the layer list.
    pub fn resolve_layers(&self, datasets: &BTreeMap<Condition, ActivationDataset>) -> Result<Vec<usize>> {
        let mut ids: Option<Vec<usize>> = None;
        for (cond, ds) in datasets {
            if ds.condition() != *cond {
                return Err(Error::Plan(format!("dataset listed as {cond} declares condition {}", ds.condition())));
            }
            if self.methods.contains(&Method::RsaGlobalPartial) && !ds.has_confounds() {
                return Err(Error::Plan(format!("{cond} dataset has no confound vectors for rsa_global_partial")));
            }
            let here = ds.layer_ids();
            match &ids {
                None => ids = Some(here),
                Some(prev) if *prev != here => {
                    return Err(Error::Plan("datasets disagree on layer ids".into()));
                }
                _ => {}
            }
        }
        let available = ids.unwrap_or_default();
        let mut layers = self.layers.clone().unwrap_or_else(|| available.clone());
        layers.sort_unstable();
        layers.dedup();
        if let Some(l) = layers.iter().find(|l| !available.contains(l)) {
            return Err(Error::Plan(format!("layer {l} not present in the datasets")));
        }
        Ok(layers)
    }
}

/// One grid cell's outcome. Exactly one of `score` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub scope: Scope,
    pub pooling: Option<PoolingKind>,
    pub layer: usize,
    pub condition: Condition,
    pub seed: u64,
    pub score_kind: ScoreKind,
    pub score: Option<f64>,
    /// Validation frames, validation utterances, or sampled pairs.
    pub n_items: Option<usize>,
    pub wall_time_s: Option<f64>,
    pub error: Option<String>,
}

impl ReportRow {
    fn cell(method: Method, layer: usize, condition: Condition, seed: u64) -> Self {
        Self {
            method,
            scope: method.scope(),
            pooling: method.pooling(),
            layer,
            condition,
            seed,
            score_kind: method.score_kind(),
            score: None,
            n_items: None,
            wall_time_s: None,
            error: None,
        }
    }

    pub fn sort_key(&self) -> (Method, usize, Condition, u64) {
        (self.method, self.layer, self.condition, self.seed)
    }

    /// Method-derived columns agree with the method, and exactly one of
    /// score and error is present.
    pub fn check(&self) -> Result<()> {
        let m = self.method;
        if self.scope != m.scope() || self.pooling != m.pooling() || self.score_kind != m.score_kind() {
            return Err(Error::InvalidRow(format!(
                "{m} row at layer {} carries {}/{}",
                self.layer,
                self.scope.as_str(),
                self.score_kind.as_str()
            )));
        }
        if self.score.is_some() == self.error.is_some() {
            return Err(Error::InvalidRow(format!("{m} row at layer {} needs exactly one of score and error", self.layer)));
        }
        Ok(())
    }
}

/// Loads and checks every dataset named by the plan.
pub fn load_plan_datasets(plan: &ExperimentPlan) -> Result<BTreeMap<Condition, ActivationDataset>> {
    plan.datasets
        .iter()
        .map(|(cond, path)| Ok((*cond, load_dataset(path)?)))
        .collect()
}

/// Loads the plan's datasets and runs the grid with at most `jobs` threads
/// (all cores when `None`).
pub fn run_experiment(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<Vec<ReportRow>> {
    plan.validate()?;
    let datasets = load_plan_datasets(plan)?;
    run_grid(plan, &datasets, jobs)
}

/// Runs the grid on already-loaded datasets. Rows come back sorted by
/// (method, layer, condition, seed).
pub fn run_grid(
    plan: &ExperimentPlan,
    datasets: &BTreeMap<Condition, ActivationDataset>,
    jobs: Option<usize>,
) -> Result<Vec<ReportRow>> {
    plan.validate()?;
    let layers = plan.resolve_layers(datasets)?;
    let mut methods = plan.methods.clone();
    methods.sort_unstable();
    methods.dedup();
    let mut seeds = plan.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let mut cells = Vec::new();
    for &method in &methods {
        for &layer in &layers {
            for &condition in datasets.keys() {
                for &seed in &seeds {
                    cells.push(ReportRow::cell(method, layer, condition, seed));
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Plan(format!("thread pool: {e}")))?;
    let mut rows: Vec<ReportRow> = pool.install(|| {
        cells
            .into_par_iter()
            .map(|mut row| {
                let started = Instant::now();
                match run_cell(plan, &datasets[&row.condition], row.method, row.layer, row.seed) {
                    Ok((score, n)) => {
                        row.score = Some(score);
                        row.n_items = Some(n);
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
                if plan.record_wall_time {
                    row.wall_time_s = Some((started.elapsed().as_secs_f64() * 1e3).round() / 1e3);
                }
                row
            })
            .collect()
    });
    rows.sort_by_key(ReportRow::sort_key);
    Ok(rows)
}

fn clamp_pairs(requested: usize, n_items: usize) -> usize {
    requested.min(n_items / 2)
}

/// Score and item count for one cell.
pub fn run_cell(
    plan: &ExperimentPlan,
    dataset: &ActivationDataset,
    method: Method,
    layer: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let split: SplitAssignment = split_half(dataset, seed)?;
    let n_val = split.val_ids.len();
    let global_pairs = Some(clamp_pairs(plan.global_pairs.unwrap_or(n_val / 2), n_val));
    let train_cfg = TrainConfig {
        seed,
        ..plan.train.clone()
    };
    match method {
        Method::DiagLocal => {
            let probe = train_local_probe(dataset, layer, &split, &train_cfg)?;
            let n = probe.validation.per_class.iter().map(|c| c.n).sum();
            Ok((probe.validation.rer, n))
        }
        Method::DiagGlobalMean | Method::DiagGlobalAttn => {
            let pooling = method.pooling().expect("global method");
            let probe = train_global_probe(dataset, layer, &split, pooling, &train_cfg)?;
            Ok((probe.validation.rer, n_val))
        }
        Method::RsaLocal => {
            let (_, val) = split.indices(dataset);
            let layer_data = dataset.layer(layer)?;
            let n_frames: usize = val.iter().map(|&i| layer_data.sequences[i].nrows()).sum();
            let r = rsa::local_rsa(dataset, layer, &split, clamp_pairs(plan.local_pairs, n_frames), seed)?;
            Ok((r.score, r.n_pairs))
        }
        Method::RsaGlobalMean => {
            let r = rsa::global_rsa(dataset, layer, &PoolingSpec::Mean, &split, global_pairs, seed)?;
            Ok((r.score, r.n_pairs))
        }
        Method::RsaGlobalAttn => {
            let cfg = AttentionRsaConfig {
                seed,
                n_pairs: global_pairs,
                ..plan.attention_rsa.clone()
            };
            let run = rsa::train_attention_rsa(dataset, layer, &split, &cfg)?;
            Ok((run.result.score, run.result.n_pairs))
        }
        Method::RsaGlobalPartial => {
            let r = rsa::global_rsa_partial(dataset, layer, &PoolingSpec::Mean, &split, global_pairs, seed)?;
            Ok((r.score, r.n_pairs))
        }
    }
}
