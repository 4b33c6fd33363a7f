//! Model files and learning-curve exports.
//!
//! A model file is a JSON document whose parameter arrays are base64-encoded
//! little-endian `f64`s, so a save/load round trip is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Normalizer, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::network::{LayerSpec, Network};
use crate::tensor::{Matrix, Vector};
use crate::train::{CVReport, RunHistory, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_mae,val_loss,val_mae";
pub const CV_REPORT_HEADER: &str = "fold,final_val_mae,best_val_mae";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file is not valid at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("model format version {found} is not supported by this build (expects {supported}); re-export the model with a matching version")]
    UnsupportedVersion { found: u64, supported: u32 },
    #[error("model file is corrupt: {0}")]
    Corrupt(String),
}

/// Provenance stored next to the parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainConfig>,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NormalizerFile {
    mean: String,
    std: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u64,
    layers: Vec<LayerSpec>,
    weights: Vec<String>,
    biases: Vec<String>,
    normalizer: NormalizerFile,
    #[serde(default)]
    training: Option<TrainConfig>,
    #[serde(default)]
    seeds: BTreeMap<String, u64>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

fn encode(xs: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    B64.encode(bytes)
}

fn decode(what: &str, s: &str, expected: usize) -> Result<Vec<f64>, ModelError> {
    let bytes = B64
        .decode(s)
        .map_err(|e| ModelError::Corrupt(format!("{what}: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(ModelError::Corrupt(format!(
            "{what}: {} bytes, expected {}",
            bytes.len(),
            expected * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn model_to_json(net: &Network, norm: &Normalizer, meta: &ModelMeta) -> String {
    let file = ModelFile {
        format_version: FORMAT_VERSION as u64,
        layers: net.specs().to_vec(),
        weights: net.weights().iter().map(|w| encode(w.as_slice())).collect(),
        biases: net.biases().iter().map(|b| encode(b.as_slice())).collect(),
        normalizer: NormalizerFile {
            mean: encode(&norm.mean()),
            std: encode(&norm.std()),
        },
        training: meta.training,
        seeds: meta.seeds.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

fn parse_error(text: &str, e: serde_json::Error) -> ModelError {
    let (line, column) = (e.line(), e.column());
    let offset = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    ModelError::Parse {
        offset,
        line,
        column,
        message: e.to_string(),
    }
}

pub fn model_from_json(text: &str) -> Result<(Network, Normalizer, ModelMeta)> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
    if probe.format_version != FORMAT_VERSION as u64 {
        return Err(ModelError::UnsupportedVersion {
            found: probe.format_version,
            supported: FORMAT_VERSION,
        }
        .into());
    }
    let file: ModelFile = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
    if file.weights.len() != file.layers.len() || file.biases.len() != file.layers.len() {
        return Err(ModelError::Corrupt("layer and parameter counts differ".into()).into());
    }
    let mut weights = Vec::with_capacity(file.layers.len());
    let mut biases = Vec::with_capacity(file.layers.len());
    for (l, spec) in file.layers.iter().enumerate() {
        let w = decode(&format!("weights[{l}]"), &file.weights[l], spec.in_dim * spec.out_dim)?;
        let b = decode(&format!("biases[{l}]"), &file.biases[l], spec.out_dim)?;
        weights.push(Matrix::new(spec.in_dim, spec.out_dim, w)?);
        biases.push(Vector::from(b));
    }
    let net = Network::from_parts(file.layers, weights, biases)?;
    let mean = decode("normalizer.mean", &file.normalizer.mean, NUM_FEATURES)?;
    let std = decode("normalizer.std", &file.normalizer.std, NUM_FEATURES)?;
    let norm = Normalizer::from_parts(
        mean.try_into().expect("length checked"),
        std.try_into().expect("length checked"),
    )?;
    Ok((
        net,
        norm,
        ModelMeta {
            training: file.training,
            seeds: file.seeds,
        },
    ))
}

pub fn save_model(net: &Network, norm: &Normalizer, meta: &ModelMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(net, norm, meta)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Network, Normalizer, ModelMeta)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

pub fn write_history_csv<W: Write>(history: &RunHistory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in &history.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.train_loss, r.train_mae, r.val_loss, r.val_mae
        )?;
    }
    out.flush()
}

pub fn write_cv_report_csv<W: Write>(report: &CVReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CV_REPORT_HEADER}")?;
    for (fold, (fin, best)) in report.final_val_mae.iter().zip(&report.best_val_mae).enumerate() {
        writeln!(out, "{fold},{fin},{best}")?;
    }
    writeln!(out, "mean,{},{}", report.mean_val_mae, report.mean_best_val_mae)?;
    writeln!(out, "std,{},{}", report.std_val_mae, report.std_best_val_mae)?;
    out.flush()
}

pub fn save_csv_with(path: impl AsRef<Path>, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// A gnuplot script drawing train vs validation MAE from history CSVs.
pub fn gnuplot_script(histories: &[(&str, &Path)], output_png: &Path) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str(&format!("set output '{}'\n", output_png.display()));
    s.push_str("set xlabel 'epoch'\nset ylabel 'MAE (SOC %)'\nset grid\n");
    let mut parts = Vec::new();
    for (label, path) in histories {
        let p = path.display();
        parts.push(format!("'{p}' using 1:3 with lines title '{label} train'"));
        parts.push(format!("'{p}' using 1:5 with lines title '{label} validation'"));
    }
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}
