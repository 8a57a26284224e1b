//! Learn an attention-pooling vector that maximizes global RSA, on data where
//! only a fifth of the frames carry phoneme signal.
//!
//!     cargo run --release --example attention_rsa

use phonoprobe::data::split_half;
use phonoprobe::rsa::{train_attention_rsa, AttentionRsaConfig};
use phonoprobe::synth::{generate, SynthConfig};

fn main() -> phonoprobe::Result<()> {
    for seed in 0..3 {
        let ds = generate(&SynthConfig {
            seed,
            signal_concentration: 0.2,
            ..SynthConfig::default()
        })?
        .dataset;
        let split = split_half(&ds, seed)?;
        let run = train_attention_rsa(&ds, 1, &split, &AttentionRsaConfig { seed, ..Default::default() })?;
        println!(
            "seed {seed}: validation r {:.3} with mean pooling, {:.3} at best epoch {} (train r {:.3} -> {:.3})",
            run.val_r[0],
            run.result.score,
            run.best_epoch,
            run.train_r[0],
            run.train_r.last().unwrap()
        );
    }
    Ok(())
}
