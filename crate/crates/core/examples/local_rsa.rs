//! Local RSA: cosine similarity of frame pairs against phoneme identity.
//!
//!     cargo run --release --example local_rsa

use phonoprobe::data::{split_half, Condition};
use phonoprobe::rsa::{local_rsa, DEFAULT_LOCAL_PAIRS};
use phonoprobe::synth::{generate, Architecture, SynthConfig};

fn main() -> phonoprobe::Result<()> {
    for architecture in [Architecture::RnnLike, Architecture::TransformerLike] {
        for condition in [Condition::Trained, Condition::Random] {
            let ds = generate(&SynthConfig {
                architecture,
                condition,
                ..SynthConfig::default()
            })?
            .dataset;
            let split = split_half(&ds, 0)?;
            let scores: Vec<String> = ds
                .layer_ids()
                .into_iter()
                .map(|l| Ok(format!("{:+.3}", local_rsa(&ds, l, &split, DEFAULT_LOCAL_PAIRS, 0)?.score)))
                .collect::<phonoprobe::Result<_>>()?;
            println!("{architecture:?} {condition:<8} r by layer: {}", scores.join(" "));
        }
    }
    Ok(())
}
