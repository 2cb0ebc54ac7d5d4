//! Model and optimizer-state files: one JSON header line followed by packed
//! little-endian `f32` values, layer by layer (weights `fan_in x fan_out`
//! row-major, then biases).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mlp::{Dense, MlpModel};
use super::train::{Adam, TrainState};
use crate::error::{Error, Result};

const MODEL_FORMAT: &str = "azsr-mlp";
const ADAM_FORMAT: &str = "azsr-adam";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub n_ch: usize,
    pub grid_len: usize,
    pub dims: Vec<usize>,
    pub activations: Vec<String>,
    pub dtype: String,
    pub weight_layout: String,
    pub param_count: usize,
    #[serde(default)]
    pub train_config_hash: Option<String>,
    #[serde(default)]
    pub loss_kind: Option<String>,
    #[serde(default)]
    pub geometry_id: Option<String>,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub epoch: usize,
    #[serde(default)]
    pub toolkit_version: Option<String>,
}

impl ModelHeader {
    pub fn for_model(model: &MlpModel<f32>) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: 1,
            n_ch: model.n_ch(),
            grid_len: model.grid_len(),
            dims: model.dims(),
            activations: vec!["relu".into(), "relu".into(), "relu".into(), "linear".into()],
            dtype: "f32le".into(),
            weight_layout: "fan_in x fan_out row-major, then bias".into(),
            param_count: model.param_count(),
            train_config_hash: None,
            loss_kind: None,
            geometry_id: None,
            config_hash: None,
            epoch: 0,
            toolkit_version: Some(crate::VERSION.into()),
        }
    }
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn write_layers<W: Write>(w: &mut W, layers: &[Dense<f32>]) -> Result<()> {
    for layer in layers {
        write_f32s(w, &layer.weight)?;
        write_f32s(w, &layer.bias)?;
    }
    Ok(())
}

fn read_header<R: BufRead, H: for<'de> Deserialize<'de>>(r: &mut R) -> Result<H> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(Error::Format("missing header line".into()));
    }
    serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("header: {e}")))
}

fn read_payload<R: Read>(r: &mut R, expected_floats: usize) -> Result<Vec<f32>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != expected_floats * 4 {
        return Err(Error::Format(format!(
            "expected {} parameter bytes, found {}",
            expected_floats * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn split_layers(dims: &[usize], values: &[f32]) -> Vec<Dense<f32>> {
    let mut offset = 0;
    dims.windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weight = values[offset..offset + fan_in * fan_out].to_vec();
            offset += fan_in * fan_out;
            let bias = values[offset..offset + fan_out].to_vec();
            offset += fan_out;
            Dense {
                fan_in,
                fan_out,
                weight,
                bias,
            }
        })
        .collect()
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Writes the model; header fields describing shape are recomputed from the
/// model, the rest (hashes, epoch, loss kind) are taken from `header`.
pub fn save_model(path: &Path, model: &MlpModel<f32>, header: &ModelHeader) -> Result<()> {
    let mut h = header.clone();
    let shape = ModelHeader::for_model(model);
    h.format = shape.format;
    h.version = shape.version;
    h.n_ch = shape.n_ch;
    h.grid_len = shape.grid_len;
    h.dims = shape.dims;
    h.activations = shape.activations;
    h.dtype = shape.dtype;
    h.weight_layout = shape.weight_layout;
    h.param_count = shape.param_count;
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &h)?;
    w.write_all(b"\n")?;
    write_layers(&mut w, model.layers())?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(MlpModel<f32>, ModelHeader)> {
    let mut r = BufReader::new(File::open(path)?);
    let header: ModelHeader = read_header(&mut r)?;
    if header.format != MODEL_FORMAT {
        return Err(Error::Format(format!("not a model file: {}", header.format)));
    }
    if header.dims.len() != 5
        || header.dims[0] != 2 * header.n_ch
        || header.dims[4] != header.grid_len
        || param_count(&header.dims) != header.param_count
    {
        return Err(Error::Format(format!(
            "inconsistent header dims {:?} for n_ch {} and L {}",
            header.dims, header.n_ch, header.grid_len
        )));
    }
    let values = read_payload(&mut r, header.param_count)?;
    let layers = split_layers(&header.dims, &values);
    let model = MlpModel::from_layers(header.n_ch, header.grid_len, layers)?;
    Ok((model, header))
}

/// [`load_model`] plus a check against the geometry the caller will use.
pub fn load_model_expecting(path: &Path, n_ch: usize, grid_len: usize) -> Result<(MlpModel<f32>, ModelHeader)> {
    let (model, header) = load_model(path)?;
    if model.n_ch() != n_ch || model.grid_len() != grid_len {
        return Err(Error::ShapeMismatch {
            expected: format!("n_ch {n_ch}, L {grid_len}"),
            found: format!("n_ch {}, L {} (dims {:?})", model.n_ch(), model.grid_len(), header.dims),
        });
    }
    Ok((model, header))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdamHeader {
    format: String,
    dims: Vec<usize>,
    step: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

/// Path of the optimizer-state file that accompanies a checkpoint.
pub fn optimizer_path(checkpoint: &Path) -> PathBuf {
    let mut p = checkpoint.as_os_str().to_owned();
    p.push(".adam");
    PathBuf::from(p)
}

/// Model file at `path` plus Adam moments at [`optimizer_path`].
pub fn save_checkpoint(path: &Path, state: &TrainState<f32>, header: &ModelHeader) -> Result<()> {
    let mut h = header.clone();
    h.epoch = state.epochs_done;
    save_model(path, &state.model, &h)?;
    let adam = &state.adam;
    let ah = AdamHeader {
        format: ADAM_FORMAT.into(),
        dims: state.model.dims(),
        step: adam.step,
        learning_rate: adam.learning_rate,
        beta1: adam.beta1,
        beta2: adam.beta2,
        epsilon: adam.epsilon,
    };
    let mut w = BufWriter::new(File::create(optimizer_path(path))?);
    serde_json::to_writer(&mut w, &ah)?;
    w.write_all(b"\n")?;
    write_layers(&mut w, &adam.m)?;
    write_layers(&mut w, &adam.v)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(TrainState<f32>, ModelHeader)> {
    let (model, header) = load_model(path)?;
    let mut r = BufReader::new(File::open(optimizer_path(path))?);
    let ah: AdamHeader = read_header(&mut r)?;
    if ah.format != ADAM_FORMAT || ah.dims != header.dims {
        return Err(Error::Format("optimizer state does not match model".into()));
    }
    let n = param_count(&ah.dims);
    let values = read_payload(&mut r, 2 * n)?;
    let adam = Adam {
        learning_rate: ah.learning_rate,
        beta1: ah.beta1,
        beta2: ah.beta2,
        epsilon: ah.epsilon,
        step: ah.step,
        m: split_layers(&ah.dims, &values[..n]),
        v: split_layers(&ah.dims, &values[n..]),
    };
    let epochs_done = header.epoch;
    Ok((
        TrainState {
            model,
            adam,
            epochs_done,
        },
        header,
    ))
}
