use std::path::PathBuf;

/// Errors raised across the toolkit.
///
/// Variants carry enough context (utterance id, layer id, path) to locate the
/// offending input without re-running the job.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{path}: bad magic bytes (expected {expected:?}, found {found:?})")]
    MagicMismatch {
        path: String,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: String, version: u8 },

    #[error("shape mismatch in layer {layer_id}, utterance {utterance}: {detail}")]
    ShapeMismatch {
        layer_id: usize,
        utterance: String,
        detail: String,
    },

    #[error("non-finite activation in layer {layer_id}, utterance {utterance} at t={t}, d={d}")]
    NonFiniteValue {
        layer_id: usize,
        utterance: String,
        t: usize,
        d: usize,
    },

    #[error("alignment of utterance {utterance} out of range: span [{start}, {end}) with {n_input_frames} frames")]
    AlignmentOutOfRange {
        utterance: String,
        start: usize,
        end: usize,
        n_input_frames: usize,
    },

    #[error("invalid alignment for utterance {utterance}: {detail}")]
    InvalidAlignment { utterance: String, detail: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("manifest parse error in {path}: {source}")]
    Manifest {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("need at least 2 utterances to split, found {0}")]
    TooFewUtterances(usize),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("majority-class baseline error is zero; RER undefined")]
    ZeroBaselineError,

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("baseline model already fits the response exactly")]
    DegenerateBaseline,

    #[error("empty sequence")]
    EmptySequence,

    #[error("vector norm below threshold")]
    NearZeroNorm,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("no data: {0}")]
    NoData(&'static str),

    #[error("requested {requested} disjoint pairs from {available} items")]
    NotEnoughItems { requested: usize, available: usize },

    #[error("unknown layer id {0}")]
    UnknownLayer(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("invalid report row: {0}")]
    InvalidRow(String),

    #[error("no rows to plot")]
    NoRows,

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
