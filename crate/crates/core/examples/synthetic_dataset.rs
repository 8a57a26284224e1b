//! Generate a trained/random pair of synthetic datasets, write them to disk
//! and read them back.
//!
//!     cargo run --release --example synthetic_dataset [OUT_DIR]

use std::path::PathBuf;

use phonoprobe::data::{load_dataset, write_dataset, Condition};
use phonoprobe::synth::{frame_std, generate, pooled_std, SynthConfig};

fn main() -> phonoprobe::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("phonoprobe-synth"));

    for condition in [Condition::Trained, Condition::Random] {
        let cfg = SynthConfig {
            condition,
            ..SynthConfig::default()
        };
        let generated = generate(&cfg)?;
        let manifest = out.join(condition.as_str()).join("dataset.json");
        std::fs::create_dir_all(manifest.parent().unwrap())?;
        write_dataset(&generated.dataset, &manifest)?;

        let ds = load_dataset(&manifest)?;
        assert_eq!(ds, generated.dataset);
        println!("{} -> {}", condition, manifest.display());
        println!("  {} utterances, {} phonemes", ds.utterances().len(), ds.inventory().len());
        for layer in ds.layers() {
            println!(
                "  layer {} {:<6} pooled std {:.4}  frame std {:.4}",
                layer.layer_id,
                layer.name,
                pooled_std(&ds, layer.layer_id)?,
                frame_std(&ds, layer.layer_id)?
            );
        }
    }
    Ok(())
}
