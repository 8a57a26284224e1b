mod common;

use ndarray::Array2;

use common::{normal_matrix, rng, synth};
use phonoprobe::data::{load_dataset, split_half, write_dataset, ActivationDataset, Condition, LayerActivations};
use phonoprobe::probes::{train_local_probe, TrainConfig};
use phonoprobe::synth::{self, frame_std, gen_phoneme_stream, pooled_std, Architecture, SynthConfig};

fn single_layer(base: &ActivationDataset, sequences: Vec<Array2<f64>>) -> ActivationDataset {
    let layer = LayerActivations {
        layer_id: 0,
        name: "x".into(),
        dim: sequences[0].ncols(),
        rate_divisor: 1,
        file: "x.actv".into(),
        sequences,
    };
    ActivationDataset::new(base.inventory().clone(), base.utterances().to_vec(), vec![layer], base.condition()).unwrap()
}

#[test]
fn pure_noise_input_is_undecodable() {
    let ds = synth(&SynthConfig {
        encoding_strength: 0.0,
        ..SynthConfig::default()
    });
    let split = split_half(&ds, 0).unwrap();
    let probe = train_local_probe(&ds, 0, &split, &TrainConfig::with_seed(0)).unwrap();
    assert!(probe.validation.rer < 0.05, "rer {}", probe.validation.rer);
}

#[test]
fn pooled_std_of_iid_frames_shrinks_with_sqrt_t() {
    let cfg = SynthConfig {
        n_utterances: 300,
        min_frames: 64,
        max_frames: 64,
        n_layers: 2,
        ..SynthConfig::default()
    };
    let base = synth(&cfg);
    let mut r = rng(11);
    let seqs = (0..cfg.n_utterances).map(|_| normal_matrix(&mut r, 64, 8)).collect();
    let ds = single_layer(&base, seqs);
    let ratio = pooled_std(&ds, 0).unwrap() / (frame_std(&ds, 0).unwrap() / 8.0);
    assert!((1.0 / 1.5..1.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn constant_activations_have_no_pooled_spread() {
    let base = synth(&SynthConfig {
        n_utterances: 10,
        n_layers: 2,
        ..SynthConfig::default()
    });
    let seqs = base.utterances().iter().map(|u| Array2::from_elem((u.n_input_frames, 3), 0.7)).collect();
    let ds = single_layer(&base, seqs);
    assert!(pooled_std(&ds, 0).unwrap() < 1e-12);
    assert!(frame_std(&ds, 0).unwrap() < 1e-12);
}

#[test]
fn stream_examples() {
    let one = SynthConfig {
        n_utterances: 2,
        min_frames: 10,
        max_frames: 10,
        ..SynthConfig::default()
    };
    let stream = gen_phoneme_stream(&one).unwrap();
    for u in &stream {
        assert_eq!(u.alignment.first().unwrap().start, 0);
        assert_eq!(u.alignment.last().unwrap().end, 10);
    }
    assert_eq!(stream, gen_phoneme_stream(&one).unwrap());

    let binary = SynthConfig {
        n_utterances: 2,
        n_phonemes: 2,
        dim: 8,
        min_frames: 200,
        max_frames: 200,
        n_templates: 0,
        ..SynthConfig::default()
    };
    for u in gen_phoneme_stream(&binary).unwrap() {
        let t = u.transcription();
        assert!(t.contains(&0) && t.contains(&1));
    }
}

#[test]
fn independent_spans_have_uniform_marginals() {
    let cfg = SynthConfig {
        n_utterances: 400,
        n_templates: 0,
        ..SynthConfig::default()
    };
    let mut counts = vec![0usize; cfg.n_phonemes];
    for u in gen_phoneme_stream(&cfg).unwrap() {
        for p in u.transcription() {
            counts[p] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    let expected = total as f64 / cfg.n_phonemes as f64;
    for c in counts {
        assert!((c as f64 - expected).abs() < 0.35 * expected, "{c} vs {expected}");
    }
}

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn seed_determines_dataset_bytes() {
    let cfg = SynthConfig {
        seed: 42,
        n_utterances: 20,
        architecture: Architecture::TransformerLike,
        condition: Condition::Random,
        ..SynthConfig::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_dataset(&synth(&cfg), a.path().join("dataset.json")).unwrap();
    write_dataset(&synth(&cfg), b.path().join("dataset.json")).unwrap();
    assert_eq!(files(a.path()), files(b.path()));
    let other = SynthConfig { seed: 43, ..cfg };
    let c = tempfile::tempdir().unwrap();
    write_dataset(&synth(&other), c.path().join("dataset.json")).unwrap();
    assert_ne!(files(a.path()), files(c.path()));
}

#[test]
fn every_variant_passes_validation() {
    for architecture in [Architecture::RnnLike, Architecture::TransformerLike] {
        for condition in [Condition::Trained, Condition::Random] {
            for (rate_divisor, confound_dim, concentration) in [(1, 16, 1.0), (3, 0, 0.1)] {
                let cfg = SynthConfig {
                    n_utterances: 12,
                    architecture,
                    condition,
                    rate_divisor,
                    confound_dim,
                    signal_concentration: concentration,
                    ..SynthConfig::default()
                };
                let out = synth::generate(&cfg).unwrap();
                let dir = tempfile::tempdir().unwrap();
                write_dataset(&out.dataset, dir.path().join("dataset.json")).unwrap();
                let back = load_dataset(dir.path().join("dataset.json")).unwrap();
                assert_eq!(back.layer_ids(), (0..=cfg.n_layers).collect::<Vec<_>>());
                assert_eq!(back.condition(), condition);
                assert_eq!(back.has_confounds(), confound_dim > 0);
                for (u, frames) in back.utterances().iter().zip(&out.truth.frame_phonemes) {
                    let from_alignment: Vec<usize> = (0..u.n_input_frames).map(|t| u.phoneme_at(t).unwrap()).collect();
                    assert_eq!(&from_alignment, frames);
                }
                let informative: usize = out.truth.informative.iter().flatten().filter(|&&b| b).count();
                let total: usize = out.truth.informative.iter().map(Vec::len).sum();
                let share = informative as f64 / total as f64;
                assert!((share - concentration).abs() < 0.05, "informative share {share}");
            }
        }
    }
}

#[test]
fn conditions_share_their_utterances() {
    let trained = synth(&common::synth_cfg(3, Condition::Trained));
    let random = synth(&common::synth_cfg(3, Condition::Random));
    assert_eq!(trained.utterances(), random.utterances());
    assert_eq!(trained.layer(0).unwrap(), random.layer(0).unwrap());
    assert_ne!(trained.layer(1).unwrap(), random.layer(1).unwrap());
}

#[test]
fn invalid_configs_are_rejected() {
    for cfg in [
        SynthConfig { n_layers: 1, ..SynthConfig::default() },
        SynthConfig { encoding_strength: 1.5, ..SynthConfig::default() },
        SynthConfig { signal_concentration: 0.0, ..SynthConfig::default() },
        SynthConfig { dim: 10, ..SynthConfig::default() },
        SynthConfig { min_frames: 50, max_frames: 20, ..SynthConfig::default() },
    ] {
        assert!(matches!(synth::generate(&cfg), Err(phonoprobe::Error::Config(_))));
    }
}
