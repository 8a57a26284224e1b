//! Global RSA controlled for a confound: how much the neural similarities
//! explain string similarity beyond what confound similarities already do.
//!
//!     cargo run --release --example confound_partial_rsa

use phonoprobe::data::{split_half, Condition};
use phonoprobe::pooling::PoolingSpec;
use phonoprobe::rsa::{global_rsa, global_rsa_partial};
use phonoprobe::synth::{generate, SynthConfig};

fn main() -> phonoprobe::Result<()> {
    for confound_mix in [0.0, 0.5, 1.0] {
        for condition in [Condition::Trained, Condition::Random] {
            let ds = generate(&SynthConfig {
                condition,
                confound_mix,
                ..SynthConfig::default()
            })?
            .dataset;
            let split = split_half(&ds, 0)?;
            let plain = global_rsa(&ds, 3, &PoolingSpec::Mean, &split, None, 0)?;
            let partial = global_rsa_partial(&ds, 3, &PoolingSpec::Mean, &split, None, 0)?;
            println!(
                "confound mix {confound_mix:.1} {condition:<8} layer 3: r {:+.3}  sqrt|R2 partial| {:.3}",
                plain.score, partial.score
            );
        }
    }
    Ok(())
}
