use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use phonoprobe::data::{load_dataset, write_dataset, Condition};
use phonoprobe::experiment::{self, ExperimentPlan, Method};
use phonoprobe::synth::{self, Architecture, SynthConfig};
use phonoprobe::Error;

#[derive(Parser)]
#[command(name = "phonoprobe", version, about = "Phoneme probing and RSA over layerwise activations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Conditions {
    Trained,
    Random,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    RnnLike,
    TransformerLike,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic datasets and a plan.json covering them.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// SynthConfig JSON; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        condition: Conditions,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_utterances: Option<usize>,
        #[arg(long)]
        n_layers: Option<usize>,
        #[arg(long, value_enum)]
        architecture: Option<Arch>,
        #[arg(long)]
        encoding_strength: Option<f64>,
        #[arg(long)]
        signal_concentration: Option<f64>,
    },
    /// Load a dataset manifest and check every invariant.
    Validate { dataset: PathBuf },
    /// Run a plan's method grid; writes rows.csv and one SVG per method.
    Run {
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
        /// Local RSA pair count.
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        global_pairs: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Render SVG panels from a rows CSV.
    Report {
        rows: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Plan(_) | Error::Config(_) => 2,
        Error::Io(_) | Error::MissingFile(_) => 3,
        Error::Csv(c) if c.is_io_error() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth {
            out,
            config,
            condition,
            seed,
            n_utterances,
            n_layers,
            architecture,
            encoding_strength,
            signal_concentration,
        } => (|| {
            let mut cfg = match config {
                Some(path) => read_synth_config(&path)?,
                None => SynthConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.n_utterances = n_utterances.unwrap_or(cfg.n_utterances);
            cfg.n_layers = n_layers.unwrap_or(cfg.n_layers);
            cfg.encoding_strength = encoding_strength.unwrap_or(cfg.encoding_strength);
            cfg.signal_concentration = signal_concentration.unwrap_or(cfg.signal_concentration);
            if let Some(a) = architecture {
                cfg.architecture = match a {
                    Arch::RnnLike => Architecture::RnnLike,
                    Arch::TransformerLike => Architecture::TransformerLike,
                };
            }
            let conditions = match condition {
                Conditions::Trained => vec![Condition::Trained],
                Conditions::Random => vec![Condition::Random],
                Conditions::Both => vec![Condition::Trained, Condition::Random],
            };
            synth_command(&cfg, &conditions, &out)
        })(),
        Command::Validate { dataset } => load_dataset(&dataset).map(|ds| {
            println!(
                "{}: ok ({} condition, {} utterances, {} phonemes, layers {:?})",
                dataset.display(),
                ds.condition(),
                ds.utterances().len(),
                ds.inventory().len(),
                ds.layer_ids()
            );
        }),
        Command::Run {
            plan,
            out,
            jobs,
            seeds,
            layers,
            pairs,
            global_pairs,
            methods,
        } => (|| {
            let mut plan = ExperimentPlan::from_file(&plan)?;
            if let Some(s) = seeds {
                plan.seeds = s;
            }
            if let Some(l) = layers {
                plan.layers = Some(l);
            }
            if let Some(p) = pairs {
                plan.local_pairs = p;
            }
            if let Some(p) = global_pairs {
                plan.global_pairs = Some(p);
            }
            if let Some(m) = methods {
                plan.methods = m.iter().map(|s| s.parse::<Method>()).collect::<Result<_, _>>()?;
            }
            if jobs == Some(0) {
                return Err(Error::Plan("--jobs must be positive".into()));
            }
            run_command(&plan, jobs, &out)
        })(),
        Command::Report { rows, out } => experiment::read_csv(&rows).and_then(|rows| {
            for path in experiment::emit_svg(&rows, &out)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_synth_config(path: &Path) -> phonoprobe::Result<SynthConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn synth_command(cfg: &SynthConfig, conditions: &[Condition], out: &Path) -> phonoprobe::Result<()> {
    let mut datasets = BTreeMap::new();
    for &condition in conditions {
        let cfg = SynthConfig {
            condition,
            ..cfg.clone()
        };
        let generated = synth::generate(&cfg)?;
        let rel = PathBuf::from(condition.as_str()).join("dataset.json");
        std::fs::create_dir_all(out.join(condition.as_str()))?;
        write_dataset(&generated.dataset, out.join(&rel))?;
        println!("wrote {}", out.join(&rel).display());
        datasets.insert(condition, rel);
    }
    let mut plan = ExperimentPlan::new(datasets);
    if cfg.confound_dim == 0 {
        plan.methods.retain(|&m| m != Method::RsaGlobalPartial);
    }
    let text = serde_json::to_string_pretty(&plan).map_err(|e| Error::Plan(e.to_string()))? + "\n";
    std::fs::write(out.join("plan.json"), text)?;
    println!("wrote {}", out.join("plan.json").display());
    Ok(())
}

fn run_command(plan: &ExperimentPlan, jobs: Option<usize>, out: &Path) -> phonoprobe::Result<()> {
    let rows = experiment::run_experiment(plan, jobs)?;
    std::fs::create_dir_all(out)?;
    let csv_path = out.join("rows.csv");
    experiment::emit_csv(&rows, &csv_path)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("wrote {} ({} rows, {} failed)", csv_path.display(), rows.len(), failed);
    match experiment::emit_svg(&rows, out) {
        Ok(paths) => println!("wrote {} plots", paths.len()),
        Err(Error::NoRows) => eprintln!("no scored rows; skipping plots"),
        Err(e) => return Err(e),
    }
    Ok(())
}
