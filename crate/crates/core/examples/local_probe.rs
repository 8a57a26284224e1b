//! Frame-level diagnostic classifier on every layer of a synthetic dataset,
//! with a probe snapshot written and reloaded.
//!
//!     cargo run --release --example local_probe

use phonoprobe::data::{split_half, Condition};
use phonoprobe::probes::{eval_local, read_probe, train_local_probe, write_probe, FrameSet, TrainConfig};
use phonoprobe::synth::{generate, SynthConfig};

fn main() -> phonoprobe::Result<()> {
    for condition in [Condition::Trained, Condition::Random] {
        let ds = generate(&SynthConfig {
            condition,
            ..SynthConfig::default()
        })?
        .dataset;
        let split = split_half(&ds, 0)?;
        println!("{condition}");
        for layer in ds.layer_ids() {
            let probe = train_local_probe(&ds, layer, &split, &TrainConfig::with_seed(0))?;
            let v = &probe.validation;
            println!(
                "  layer {layer}: error {:.3} vs majority {:.3} -> RER {:.3} (best epoch {} of {})",
                v.error_rate,
                v.baseline_error,
                v.rer,
                probe.history.best_epoch,
                probe.history.epochs()
            );
            if layer == 0 && condition == Condition::Trained {
                let path = std::env::temp_dir().join("phonoprobe-local.prb");
                write_probe(&probe.model, &path)?;
                let back = read_probe(&path)?;
                let (_, val) = split.indices(&ds);
                let frames = FrameSet::from_layer(&ds, layer, &val)?;
                println!("  reloaded snapshot RER {:.3}", eval_local(&back, &frames)?.rer);
            }
        }
    }
    Ok(())
}
