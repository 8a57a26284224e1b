//! Utterance-level phoneme-presence probe with mean and attention pooling.
//!
//!     cargo run --release --example global_probe

use phonoprobe::data::{split_half, Condition};
use phonoprobe::pooling::PoolingKind;
use phonoprobe::probes::{train_global_probe, TrainConfig};
use phonoprobe::synth::{generate, SynthConfig};

fn main() -> phonoprobe::Result<()> {
    for condition in [Condition::Trained, Condition::Random] {
        let ds = generate(&SynthConfig {
            condition,
            ..SynthConfig::default()
        })?
        .dataset;
        let split = split_half(&ds, 0)?;
        for pooling in [PoolingKind::Mean, PoolingKind::Attention] {
            let scores: Vec<String> = ds
                .layer_ids()
                .into_iter()
                .map(|layer| {
                    let probe = train_global_probe(&ds, layer, &split, pooling, &TrainConfig::with_seed(0))?;
                    Ok(format!("{:+.3}", probe.validation.rer))
                })
                .collect::<phonoprobe::Result<_>>()?;
            println!("{condition:<8} {:<9} RER by layer: {}", pooling.as_str(), scores.join(" "));
        }
    }
    Ok(())
}
