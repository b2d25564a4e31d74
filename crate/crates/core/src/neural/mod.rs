//! Recurrent forecasters built from scratch.
//!
//! One recurrent layer (RNN, simple or full GRU, or LSTM) is unrolled over a
//! lookback window of scaled prices, one value per time step, and a linear
//! head maps the final activation to a one-step-ahead prediction. Training is
//! mini-batch backpropagation through time with ADAM; `grid` sweeps
//! hyperparameter combinations.

mod adam;
mod cell;
mod grid;
mod io;
mod params;
mod train;

pub use adam::{adam_step, AdamSettings, AdamState};
pub use cell::{
    gru_cell_forward, lstm_cell_forward, rnn_cell_forward, CellState, Gate, GruCellParams,
    LstmCellParams, RnnCellParams, StepCache,
};
pub use grid::{grid_search, GridSearch, GridSpec, TrialOutcome, TrialRecord};
pub use io::{load_network, save_network};
pub use params::{ParamLayout, Seg};
pub use train::{
    apply_dropout, backward, forward, predict, predict_one, train, ForwardPass, Phase,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};
use crate::Float;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("hidden_units must be at least 1")]
    ZeroHiddenUnits,
    #[error("dropout rate must lie in [0, 1), got {0}")]
    BadDropoutRate(f64),
    #[error("window length {got} does not match lookback {lookback} x input size {input}")]
    WindowLength { got: usize, lookback: usize, input: usize },
    #[error("dataset lookback {data} does not match network lookback {net}")]
    LookbackMismatch { data: usize, net: usize },
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("epochs and batch_size must be at least 1")]
    BadTrainConfig,
    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("training diverged after {completed} finite epochs (last rmse {last_rmse})")]
    Diverged { completed: usize, last_rmse: f64 },
    #[error("grid specification has an empty dimension: {0}")]
    EmptyGrid(&'static str),
    #[error("every grid trial failed; first error: {0}")]
    AllTrialsFailed(String),
    #[error("model file is not valid: {0}")]
    BadModelFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The recurrent cell variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Rnn,
    GruSimple,
    GruFull,
    Lstm,
}

impl CellKind {
    pub const ALL: [CellKind; 4] =
        [CellKind::Rnn, CellKind::GruSimple, CellKind::GruFull, CellKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Rnn => "rnn",
            CellKind::GruSimple => "gru_simple",
            CellKind::GruFull => "gru_full",
            CellKind::Lstm => "lstm",
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rnn" => Ok(CellKind::Rnn),
            "gru_simple" | "gru-simple" => Ok(CellKind::GruSimple),
            "gru_full" | "gru-full" | "gru" => Ok(CellKind::GruFull),
            "lstm" => Ok(CellKind::Lstm),
            other => Err(format!("unknown cell kind {other:?} (rnn, gru_simple, gru_full, lstm)")),
        }
    }
}

/// Training loss. Epoch histories are always reported as RMSE; the gradient
/// is taken through the proportional MSE to avoid the singularity of the
/// square root at zero error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    Mse,
}

/// Training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: Loss,
    pub shuffle: bool,
    pub seed: u64,
    pub adam: AdamSettings,
    /// L2 term added to the accumulated gradient, scaled by the batch size;
    /// zero by default.
    pub weight_decay: f64,
    /// Global-norm gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            loss: Loss::Mse,
            shuffle: true,
            seed: 3,
            adam: AdamSettings::default(),
            weight_decay: 0.0,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NeuralError::BadTrainConfig);
        }
        Ok(())
    }
}

/// A recurrent network: one cell unrolled over the lookback window plus a
/// linear output head, with all parameters in a flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentNetwork<S> {
    kind: CellKind,
    hidden_units: usize,
    input_size: usize,
    lookback: usize,
    dropout_rate: f64,
    seed: u64,
    layout: ParamLayout,
    params: Vec<S>,
}

/// Seed-deterministic construction: weights drawn uniformly within the
/// scaled bound `sqrt(6 / (fan_in + fan_out))`, biases zero.
pub fn init_network<S: Float>(
    kind: CellKind,
    hidden_units: usize,
    input_size: usize,
    lookback: usize,
    dropout_rate: f64,
    seed: u64,
) -> Result<RecurrentNetwork<S>, NeuralError> {
    if hidden_units == 0 {
        return Err(NeuralError::ZeroHiddenUnits);
    }
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(NeuralError::BadDropoutRate(dropout_rate));
    }
    let input_size = input_size.max(1);
    let layout = ParamLayout::new(kind, hidden_units, input_size);
    let params = layout.init_params(&mut rng::stream(seed, Stream::Init, 0));
    Ok(RecurrentNetwork {
        kind,
        hidden_units,
        input_size,
        lookback,
        dropout_rate,
        seed,
        layout,
        params,
    })
}

impl<S: Float> RecurrentNetwork<S> {
    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_units
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn segment(&self, seg: Seg) -> &[S] {
        &self.params[self.layout.range(seg)]
    }

    pub fn segment_mut(&mut self, seg: Seg) -> &mut [S] {
        let range = self.layout.range(seg);
        &mut self.params[range]
    }

    /// Rebuild a network from stored fields; lengths must match the layout.
    pub(crate) fn from_parts(
        kind: CellKind,
        hidden_units: usize,
        input_size: usize,
        lookback: usize,
        dropout_rate: f64,
        seed: u64,
        params: Vec<S>,
    ) -> Result<Self, NeuralError> {
        if hidden_units == 0 {
            return Err(NeuralError::ZeroHiddenUnits);
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(NeuralError::BadDropoutRate(dropout_rate));
        }
        let layout = ParamLayout::new(kind, hidden_units, input_size);
        if params.len() != layout.len() {
            return Err(NeuralError::BadModelFile(format!(
                "expected {} parameters, found {}",
                layout.len(),
                params.len()
            )));
        }
        Ok(Self { kind, hidden_units, input_size, lookback, dropout_rate, seed, layout, params })
    }

    pub(crate) fn rnn_params(&self) -> RnnCellParams<'_, S> {
        RnnCellParams {
            w_aa: self.segment(Seg::WAa),
            w_ax: self.segment(Seg::WAx),
            b_a: self.segment(Seg::BA),
            w_ya: self.segment(Seg::WOut),
            b_y: self.segment(Seg::BOut)[0],
        }
    }

    pub(crate) fn gru_params(&self) -> GruCellParams<'_, S> {
        GruCellParams {
            candidate: Gate { w: self.segment(Seg::WC), b: self.segment(Seg::BC) },
            update: Gate { w: self.segment(Seg::WU), b: self.segment(Seg::BU) },
            relevance: (self.kind == CellKind::GruFull).then(|| Gate {
                w: self.segment(Seg::WR),
                b: self.segment(Seg::BR),
            }),
        }
    }

    pub(crate) fn lstm_params(&self) -> LstmCellParams<'_, S> {
        LstmCellParams {
            candidate: Gate { w: self.segment(Seg::WC), b: self.segment(Seg::BC) },
            update: Gate { w: self.segment(Seg::WU), b: self.segment(Seg::BU) },
            forget: Gate { w: self.segment(Seg::WF), b: self.segment(Seg::BF) },
            output: Gate { w: self.segment(Seg::WO), b: self.segment(Seg::BO) },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_bit_identical_for_equal_seeds() {
        let a: RecurrentNetwork<f64> = init_network(CellKind::Lstm, 6, 1, 4, 0.1, 3).unwrap();
        let b: RecurrentNetwork<f64> = init_network(CellKind::Lstm, 6, 1, 4, 0.1, 3).unwrap();
        assert_eq!(a.params(), b.params());
        let c: RecurrentNetwork<f64> = init_network(CellKind::Lstm, 6, 1, 4, 0.1, 4).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn init_rejects_bad_arguments() {
        assert!(matches!(
            init_network::<f64>(CellKind::Rnn, 0, 1, 2, 0.0, 3),
            Err(NeuralError::ZeroHiddenUnits)
        ));
        assert!(matches!(
            init_network::<f64>(CellKind::Rnn, 2, 1, 2, 1.0, 3),
            Err(NeuralError::BadDropoutRate(_))
        ));
    }

    #[test]
    fn biases_start_at_zero() {
        let net: RecurrentNetwork<f64> = init_network(CellKind::GruFull, 5, 1, 3, 0.0, 3).unwrap();
        for seg in [Seg::BC, Seg::BU, Seg::BR, Seg::BOut] {
            assert!(net.segment(seg).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn cell_kind_parses_both_separators() {
        assert_eq!("gru-simple".parse::<CellKind>().unwrap(), CellKind::GruSimple);
        assert_eq!("lstm".parse::<CellKind>().unwrap(), CellKind::Lstm);
        assert!("mlp".parse::<CellKind>().is_err());
    }
}
