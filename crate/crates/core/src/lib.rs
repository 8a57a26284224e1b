//! Measuring phoneme and phoneme-sequence information in layerwise neural
//! activations.
//!
//! Two analysis families are provided at two temporal scopes:
//!
//! | | local (frame) | global (utterance) |
//! |---|---|---|
//! | diagnostic classifier | [`probes::train_local_probe`] | [`probes::train_global_probe`] |
//! | RSA | [`rsa::local_rsa`] | [`rsa::global_rsa`], [`rsa::train_attention_rsa`], [`rsa::global_rsa_partial`] |
//!
//! Inputs are [`data::ActivationDataset`]s (a JSON manifest plus binary
//! `ACTV` layer files). [`synth`] generates datasets with known ground truth,
//! and [`experiment`] runs whole method grids and writes CSV/SVG reports.

pub mod data;
pub mod error;
pub mod experiment;
pub mod phonsim;
pub mod pooling;
pub mod probes;
pub mod rsa;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
