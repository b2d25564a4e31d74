//! Network serialization: versioned JSON with full-precision parameters.
//!
//! Parameters are written as JSON numbers in shortest round-trip form, so a
//! save/load cycle restores bit-identical values. The flat parameter order is
//! fixed by [`super::ParamLayout`] and versioned through `format`/`version`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Float;

use super::{CellKind, NeuralError, RecurrentNetwork};

const FORMAT: &str = "pricecast-network";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    cell_kind: CellKind,
    hidden_units: usize,
    input_size: usize,
    lookback: usize,
    dropout_rate: f64,
    seed: u64,
    params: Vec<f64>,
}

pub fn save_network<S: Float>(
    net: &RecurrentNetwork<S>,
    path: impl AsRef<Path>,
) -> Result<(), NeuralError> {
    let file = ModelFile {
        format: FORMAT.to_string(),
        version: VERSION,
        cell_kind: net.kind(),
        hidden_units: net.hidden_units(),
        input_size: net.input_size(),
        lookback: net.lookback(),
        dropout_rate: net.dropout_rate(),
        seed: net.seed(),
        params: net.params().iter().map(|p| p.as_f64()).collect(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| NeuralError::BadModelFile(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_network<S: Float>(path: impl AsRef<Path>) -> Result<RecurrentNetwork<S>, NeuralError> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| NeuralError::BadModelFile(e.to_string()))?;
    if file.format != FORMAT {
        return Err(NeuralError::BadModelFile(format!("unknown format {:?}", file.format)));
    }
    if file.version != VERSION {
        return Err(NeuralError::BadModelFile(format!("unsupported version {}", file.version)));
    }
    let params: Vec<S> = file.params.iter().map(|p| S::cast(*p)).collect();
    RecurrentNetwork::from_parts(
        file.cell_kind,
        file.hidden_units,
        file.input_size,
        file.lookback,
        file.dropout_rate,
        file.seed,
        params,
    )
}
