//! Hyperparameter grid search over dropout, units, epochs and lookback.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::make_windows;
use crate::rng::{derive_seed, Stream};
use crate::Float;

use super::{init_network, predict, train, CellKind, NeuralError, TrainConfig};

/// Candidate value lists, crossed as a Cartesian product. Enumeration order
/// is dropout (outermost), units, epochs, lookback (innermost); the trial
/// index is the position in that order and also the tie-break of last resort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dropout: Vec<f64>,
    pub units: Vec<usize>,
    pub epochs: Vec<usize>,
    pub lookback: Vec<usize>,
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub dropout: f64,
    pub units: usize,
    pub epochs: usize,
    pub lookback: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.dropout.is_empty() {
            return Err(NeuralError::EmptyGrid("dropout"));
        }
        if self.units.is_empty() {
            return Err(NeuralError::EmptyGrid("units"));
        }
        if self.epochs.is_empty() {
            return Err(NeuralError::EmptyGrid("epochs"));
        }
        if self.lookback.is_empty() {
            return Err(NeuralError::EmptyGrid("lookback"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dropout.len() * self.units.len() * self.epochs.len() * self.lookback.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &dropout in &self.dropout {
            for &units in &self.units {
                for &epochs in &self.epochs {
                    for &lookback in &self.lookback {
                        out.push(GridPoint { dropout, units, epochs, lookback });
                    }
                }
            }
        }
        out
    }
}

/// Scores of a completed trial, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub train_rmse: f64,
    pub test_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub point: GridPoint,
    pub outcome: Result<TrialOutcome, String>,
    /// Wall-clock duration; informational only, excluded from determinism
    /// comparisons.
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    /// All trials, sorted ascending by test RMSE (failures last), ties broken
    /// by fewer units, smaller lookback, fewer epochs, then trial order.
    pub table: Vec<TrialRecord>,
    /// The winning grid point.
    pub best: GridPoint,
}

fn run_trial<S: Float>(
    kind: CellKind,
    point: GridPoint,
    index: usize,
    train_scaled: &[S],
    test_scaled: &[S],
    base: &TrainConfig,
) -> Result<TrialOutcome, String> {
    let train_data = make_windows(train_scaled, point.lookback, 1).map_err(|e| e.to_string())?;
    let test_data = make_windows(test_scaled, point.lookback, 1).map_err(|e| e.to_string())?;

    let trial_seed = derive_seed(base.seed, Stream::Trial, index as u64);
    let mut net = init_network::<S>(kind, point.units, 1, point.lookback, point.dropout, trial_seed)
        .map_err(|e| e.to_string())?;
    let cfg = TrainConfig { epochs: point.epochs, seed: trial_seed, ..base.clone() };
    let history = train(&mut net, &train_data, &cfg).map_err(|e| e.to_string())?;
    let train_rmse = history.last().map(|v| v.as_f64()).unwrap_or(f64::NAN);

    let preds = predict(&net, &test_data).map_err(|e| e.to_string())?;
    let test_rmse = crate::evaluation::rmse(test_data.labels(), &preds)
        .map_err(|e| e.to_string())?
        .as_f64();
    Ok(TrialOutcome { train_rmse, test_rmse })
}

fn rank_key(record: &TrialRecord) -> (u8, f64, usize, usize, usize, usize) {
    match &record.outcome {
        Ok(scores) => (
            0,
            scores.test_rmse,
            record.point.units,
            record.point.lookback,
            record.point.epochs,
            record.index,
        ),
        Err(_) => (1, f64::INFINITY, 0, 0, 0, record.index),
    }
}

/// Train one model per grid point and rank them by test-set RMSE.
///
/// Each trial derives its RNG streams from `(base.seed, trial index)`, so a
/// parallel sweep produces the identical table to a serial one. A failing
/// trial is recorded with its error and excluded from the ranking; only a
/// fully failing grid is an error.
pub fn grid_search<S: Float>(
    kind: CellKind,
    grid: &GridSpec,
    train_scaled: &[S],
    test_scaled: &[S],
    base: &TrainConfig,
    parallel: bool,
) -> Result<GridSearch, NeuralError> {
    grid.validate()?;
    let points = grid.points();

    let run = |(index, point): (usize, &GridPoint)| {
        let started = Instant::now();
        let outcome = run_trial(kind, *point, index, train_scaled, test_scaled, base);
        TrialRecord {
            index,
            point: *point,
            outcome,
            wall_time_ms: started.elapsed().as_millis() as u64,
        }
    };

    let mut table: Vec<TrialRecord> = if parallel {
        points.par_iter().enumerate().map(run).collect()
    } else {
        points.iter().enumerate().map(run).collect()
    };

    table.sort_by(|a, b| rank_key(a).partial_cmp(&rank_key(b)).expect("no NaN keys"));
    let best = match &table[0].outcome {
        Ok(_) => table[0].point,
        Err(first_error) => return Err(NeuralError::AllTrialsFailed(first_error.clone())),
    };
    Ok(GridSearch { table, best })
}
