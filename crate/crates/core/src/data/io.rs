use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::framing::{self, FORMAT_VERSION};
use super::{ActivationDataset, Condition, LayerActivations, PhonemeInventory, Span, Utterance};
use crate::error::{Error, Result};

pub const LAYER_MAGIC: [u8; 4] = *b"ACTV";

#[derive(Serialize, Deserialize)]
struct Manifest {
    inventory: Vec<String>,
    condition: Condition,
    utterances: Vec<ManifestUtterance>,
    layers: Vec<ManifestLayer>,
}

#[derive(Serialize, Deserialize)]
struct ManifestUtterance {
    id: String,
    n_input_frames: usize,
    alignment: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confound: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ManifestLayer {
    layer_id: usize,
    name: String,
    dim: usize,
    rate_divisor: usize,
    file: String,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Loads and fully validates a dataset from its `dataset.json` manifest.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<ActivationDataset> {
    let manifest_path = manifest_path.as_ref();
    let mut text = String::new();
    open(manifest_path)?.read_to_string(&mut text)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Manifest {
        path: manifest_path.display().to_string(),
        source,
    })?;
    let inventory = PhonemeInventory::new(manifest.inventory)?;
    let utterances: Vec<Utterance> = manifest
        .utterances
        .into_iter()
        .map(|u| Utterance {
            id: u.id,
            n_input_frames: u.n_input_frames,
            alignment: u
                .alignment
                .into_iter()
                .map(|[phoneme, start, end]| Span {
                    phoneme,
                    start,
                    end,
                })
                .collect(),
            confound: u.confound,
        })
        .collect();
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let layers = manifest
        .layers
        .into_iter()
        .map(|l| read_layer_file(&base.join(&l.file), l, &utterances))
        .collect::<Result<Vec<_>>>()?;
    ActivationDataset::new(inventory, utterances, layers, manifest.condition)
}

fn read_layer_file(
    path: &Path,
    meta: ManifestLayer,
    utterances: &[Utterance],
) -> Result<LayerActivations> {
    let mut r = BufReader::new(open(path)?);
    let shape_err = |utterance: &str, detail: String| Error::ShapeMismatch {
        layer_id: meta.layer_id,
        utterance: utterance.to_string(),
        detail,
    };
    let truncated = |utterance: &str| shape_err(utterance, "file truncated".into());
    let header = framing::read_header(&mut r).map_err(|_| truncated("-"))?;
    if header.magic != LAYER_MAGIC {
        return Err(Error::MagicMismatch {
            path: path.display().to_string(),
            expected: LAYER_MAGIC,
            found: header.magic,
        });
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.display().to_string(),
            version: header.version,
        });
    }
    if header.count as usize != utterances.len() {
        return Err(shape_err(
            "-",
            format!(
                "file holds {} utterances, manifest lists {}",
                header.count,
                utterances.len()
            ),
        ));
    }
    let mut sequences = Vec::with_capacity(utterances.len());
    for u in utterances {
        let (t, d) = framing::read_block_dims(&mut r).map_err(|_| truncated(&u.id))?;
        let expected_t = super::subsampled_len(u.n_input_frames, meta.rate_divisor.max(1));
        if t != expected_t || d != meta.dim {
            return Err(shape_err(
                &u.id,
                format!(
                    "block is {t}x{d}, expected {expected_t}x{} (rate_divisor {})",
                    meta.dim, meta.rate_divisor
                ),
            ));
        }
        let values = framing::read_values(&mut r, t * d).map_err(|_| truncated(&u.id))?;
        sequences.push(Array2::from_shape_vec((t, d), values).expect("block size checked"));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(shape_err("-", "trailing bytes after last utterance".into()));
    }
    Ok(LayerActivations {
        layer_id: meta.layer_id,
        name: meta.name,
        dim: meta.dim,
        rate_divisor: meta.rate_divisor,
        file: meta.file,
        sequences,
    })
}

/// Writes the manifest to `manifest_path` and each layer next to it under its
/// `file` name. Values are stored as binary32.
pub fn write_dataset(dataset: &ActivationDataset, manifest_path: impl AsRef<Path>) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    let base: PathBuf = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    if !base.as_os_str().is_empty() {
        std::fs::create_dir_all(&base)?;
    }
    let manifest = Manifest {
        inventory: dataset.inventory().symbols().to_vec(),
        condition: dataset.condition(),
        utterances: dataset
            .utterances()
            .iter()
            .map(|u| ManifestUtterance {
                id: u.id.clone(),
                n_input_frames: u.n_input_frames,
                alignment: u.alignment.iter().map(|s| [s.phoneme, s.start, s.end]).collect(),
                confound: u.confound.clone(),
            })
            .collect(),
        layers: dataset
            .layers()
            .iter()
            .map(|l| ManifestLayer {
                layer_id: l.layer_id,
                name: l.name.clone(),
                dim: l.dim,
                rate_divisor: l.rate_divisor,
                file: l.file.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(manifest_path, text)?;
    for layer in dataset.layers() {
        let mut w = BufWriter::new(File::create(base.join(&layer.file))?);
        framing::write_header(&mut w, &LAYER_MAGIC, layer.sequences.len() as u32)?;
        for seq in &layer.sequences {
            let values: Vec<f64> = seq.iter().copied().collect();
            framing::write_block(&mut w, seq.nrows(), seq.ncols(), &values)?;
        }
        w.flush()?;
    }
    Ok(())
}
