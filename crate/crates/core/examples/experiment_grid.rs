//! A reduced method grid on in-memory datasets, written as CSV and SVG.
//!
//!     cargo run --release --example experiment_grid [OUT_DIR]

use std::collections::BTreeMap;
use std::path::PathBuf;

use phonoprobe::data::Condition;
use phonoprobe::experiment::{emit_csv, emit_svg, run_grid, ExperimentPlan, Method};
use phonoprobe::synth::{generate, SynthConfig};

fn main() -> phonoprobe::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("phonoprobe-grid"));
    let mut datasets = BTreeMap::new();
    let mut paths = BTreeMap::new();
    for condition in [Condition::Trained, Condition::Random] {
        let cfg = SynthConfig {
            condition,
            n_utterances: 120,
            ..SynthConfig::default()
        };
        datasets.insert(condition, generate(&cfg)?.dataset);
        paths.insert(condition, PathBuf::from(format!("{condition}/dataset.json")));
    }
    let mut plan = ExperimentPlan::new(paths);
    plan.methods = vec![Method::DiagLocal, Method::RsaLocal, Method::RsaGlobalMean, Method::RsaGlobalPartial];
    plan.seeds = vec![0, 1];
    plan.local_pairs = 1000;

    let rows = run_grid(&plan, &datasets, None)?;
    std::fs::create_dir_all(&out)?;
    emit_csv(&rows, out.join("rows.csv"))?;
    for svg in emit_svg(&rows, &out)? {
        println!("wrote {}", svg.display());
    }
    for row in rows.iter().filter(|r| r.seed == 0 && r.layer == 5) {
        println!(
            "{:<20} {:<8} layer 5: {} = {}",
            row.method,
            row.condition,
            row.score_kind.as_str(),
            row.score.map_or_else(|| row.error.clone().unwrap_or_default(), |s| format!("{s:.3}"))
        );
    }
    Ok(())
}
