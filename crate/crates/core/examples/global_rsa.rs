//! Global RSA with mean pooling: pooled-vector cosines against edit-distance
//! similarity of transcriptions, over three seeds.
//!
//!     cargo run --release --example global_rsa

use phonoprobe::data::{split_half, Condition};
use phonoprobe::pooling::PoolingSpec;
use phonoprobe::rsa::global_rsa;
use phonoprobe::synth::{generate, SynthConfig};

fn main() -> phonoprobe::Result<()> {
    for seed in 0..3 {
        for condition in [Condition::Trained, Condition::Random] {
            let ds = generate(&SynthConfig {
                seed,
                condition,
                ..SynthConfig::default()
            })?
            .dataset;
            let split = split_half(&ds, seed)?;
            let mut line = format!("seed {seed} {condition:<8}");
            for layer in ds.layer_ids() {
                let r = global_rsa(&ds, layer, &PoolingSpec::Mean, &split, None, seed)?;
                line += &format!(" {:+.3}", r.score);
            }
            println!("{line}");
        }
    }
    Ok(())
}
