//! Network-level forward/backward passes, dropout, the training loop and
//! prediction.

use rand_chacha::ChaCha8Rng;

use crate::data::WindowedDataset;
use crate::linalg::norm2;
use crate::rng::{self, Stream};
use crate::Float;

use super::adam::{adam_step, AdamState};
use super::cell::{
    gru_cell_backward, gru_cell_forward, lstm_cell_backward, lstm_cell_forward, rnn_cell_backward,
    rnn_cell_forward, CellState, GruCellGrads, LstmCellGrads, RnnCellGrads, StepCache,
};
use super::cell::GateGrads;
use super::params::Seg;
use super::{CellKind, NeuralError, RecurrentNetwork, TrainConfig};

/// Whether dropout masks are live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

/// Inverted dropout: each unit is zeroed with probability `rate` and the
/// survivors are scaled by `1 / (1 - rate)`, so the expectation is unchanged.
/// At inference the input passes through untouched.
pub fn apply_dropout<S: Float>(
    activations: &[S],
    rate: f64,
    phase: Phase,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<S>, NeuralError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NeuralError::BadDropoutRate(rate));
    }
    if phase == Phase::Infer || rate == 0.0 {
        return Ok(activations.to_vec());
    }
    let mask = dropout_mask::<S>(activations.len(), rate, rng);
    Ok(activations.iter().zip(mask.iter()).map(|(a, m)| *a * *m).collect())
}

pub(crate) fn dropout_mask<S: Float>(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<S> {
    let keep_scale = S::cast(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| {
            let u: f64 = rng::uniform(rng);
            if u < rate {
                S::zero()
            } else {
                keep_scale
            }
        })
        .collect()
}

/// Everything the backward pass needs from one unrolled forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardPass<S> {
    pub prediction: S,
    pub final_state: CellState<S>,
    pub steps: Vec<StepCache<S>>,
}

/// Unroll the cell over a window (`lookback` steps of `input_size` values
/// each, zero initial state), apply the linear head to the final activation
/// and keep the caches for backpropagation through time.
pub fn forward<S: Float>(
    net: &RecurrentNetwork<S>,
    window: &[S],
) -> Result<ForwardPass<S>, NeuralError> {
    forward_masked(net, window, None)
}

/// Forward pass with an optional dropout mask applied to the final activation
/// before the head (the training path).
pub(crate) fn forward_masked<S: Float>(
    net: &RecurrentNetwork<S>,
    window: &[S],
    mask: Option<&[S]>,
) -> Result<ForwardPass<S>, NeuralError> {
    let input = net.input_size();
    let lookback = net.lookback();
    if window.len() != lookback * input {
        return Err(NeuralError::WindowLength { got: window.len(), lookback, input });
    }
    let mut state = CellState::zeros(net.hidden_units());
    let mut steps = Vec::with_capacity(lookback);
    for t in 0..lookback {
        let x = &window[t * input..(t + 1) * input];
        let (next, cache) = match net.kind() {
            CellKind::Rnn => {
                let (next, _y, cache) = rnn_cell_forward(x, &state, &net.rnn_params());
                (next, cache)
            }
            CellKind::GruSimple | CellKind::GruFull => {
                gru_cell_forward(x, &state, &net.gru_params())
            }
            CellKind::Lstm => lstm_cell_forward(x, &state, &net.lstm_params()),
        };
        state = next;
        steps.push(cache);
    }

    let head_w = net.segment(Seg::WOut);
    let head_b = net.segment(Seg::BOut)[0];
    let mut prediction = head_b;
    match mask {
        Some(mask) => {
            for j in 0..net.hidden_units() {
                prediction = prediction + head_w[j] * state.activation[j] * mask[j];
            }
        }
        None => {
            for j in 0..net.hidden_units() {
                prediction = prediction + head_w[j] * state.activation[j];
            }
        }
    }
    Ok(ForwardPass { prediction, final_state: state, steps })
}

/// Gradients of a scalar loss with respect to every parameter, given the
/// forward caches and `d_loss/d_prediction`. The returned vector shares the
/// network's flat layout.
pub fn backward<S: Float>(
    net: &RecurrentNetwork<S>,
    pass: &ForwardPass<S>,
    d_prediction: S,
) -> Vec<S> {
    let mut grads = vec![S::zero(); net.params().len()];
    backward_into(net, pass, d_prediction, None, &mut grads);
    grads
}

/// As [`backward`], accumulating into an existing gradient vector, with the
/// dropout mask (if any) that was live during the forward pass.
pub(crate) fn backward_into<S: Float>(
    net: &RecurrentNetwork<S>,
    pass: &ForwardPass<S>,
    d_prediction: S,
    mask: Option<&[S]>,
    grads: &mut [S],
) {
    let hidden = net.hidden_units();
    let layout = net.layout().clone();
    let act = &pass.final_state.activation;

    // Head gradients; the head saw the masked activation.
    {
        let head_range = layout.range(Seg::WOut);
        let head_grad = &mut grads[head_range];
        match mask {
            Some(mask) => {
                for j in 0..hidden {
                    head_grad[j] += d_prediction * act[j] * mask[j];
                }
            }
            None => {
                for j in 0..hidden {
                    head_grad[j] += d_prediction * act[j];
                }
            }
        }
    }
    grads[layout.range(Seg::BOut)][0] += d_prediction;

    // Gradient flowing into the final activation.
    let head_w = net.segment(Seg::WOut);
    let mut d_act: Vec<S> = match mask {
        Some(mask) => (0..hidden).map(|j| head_w[j] * mask[j] * d_prediction).collect(),
        None => (0..hidden).map(|j| head_w[j] * d_prediction).collect(),
    };

    match net.kind() {
        CellKind::Rnn => {
            let w_aa = net.segment(Seg::WAa).to_vec();
            for cache in pass.steps.iter().rev() {
                let (waa_r, wax_r, ba_r) =
                    (layout.range(Seg::WAa), layout.range(Seg::WAx), layout.range(Seg::BA));
                // Segments are disjoint; split the flat gradient accordingly.
                let (head, rest) = grads.split_at_mut(wax_r.start);
                let (mid, tail) = rest.split_at_mut(ba_r.start - wax_r.start);
                let mut views = RnnCellGrads {
                    w_aa: &mut head[waa_r],
                    w_ax: &mut mid[..wax_r.len()],
                    b_a: &mut tail[..ba_r.len()],
                };
                d_act = rnn_cell_backward(cache.as_rnn(), &d_act, &w_aa, &mut views);
            }
        }
        CellKind::GruSimple | CellKind::GruFull => {
            let full = net.kind() == CellKind::GruFull;
            for cache in pass.steps.iter().rev() {
                let params = net.gru_params();
                let mut seg_grads = split_segments(grads, &layout, &gru_segments(full));
                let mut views = GruCellGrads {
                    candidate: GateGrads {
                        w: seg_grads.remove(&Seg::WC),
                        b: seg_grads.remove(&Seg::BC),
                    },
                    update: GateGrads {
                        w: seg_grads.remove(&Seg::WU),
                        b: seg_grads.remove(&Seg::BU),
                    },
                    relevance: full.then(|| GateGrads {
                        w: seg_grads.remove(&Seg::WR),
                        b: seg_grads.remove(&Seg::BR),
                    }),
                };
                d_act = gru_cell_backward(cache.as_gru(), &d_act, &params, &mut views);
            }
        }
        CellKind::Lstm => {
            let mut d_c = vec![S::zero(); hidden];
            for cache in pass.steps.iter().rev() {
                let params = net.lstm_params();
                let mut seg_grads = split_segments(grads, &layout, &LSTM_SEGMENTS);
                let mut views = LstmCellGrads {
                    candidate: GateGrads {
                        w: seg_grads.remove(&Seg::WC),
                        b: seg_grads.remove(&Seg::BC),
                    },
                    update: GateGrads {
                        w: seg_grads.remove(&Seg::WU),
                        b: seg_grads.remove(&Seg::BU),
                    },
                    forget: GateGrads {
                        w: seg_grads.remove(&Seg::WF),
                        b: seg_grads.remove(&Seg::BF),
                    },
                    output: GateGrads {
                        w: seg_grads.remove(&Seg::WO),
                        b: seg_grads.remove(&Seg::BO),
                    },
                };
                let (d_a_prev, d_c_prev) =
                    lstm_cell_backward(cache.as_lstm(), &d_act, &d_c, &params, &mut views);
                d_act = d_a_prev;
                d_c = d_c_prev;
            }
        }
    }
}

const LSTM_SEGMENTS: [Seg; 8] =
    [Seg::WC, Seg::WU, Seg::WF, Seg::WO, Seg::BC, Seg::BU, Seg::BF, Seg::BO];

fn gru_segments(full: bool) -> Vec<Seg> {
    if full {
        vec![Seg::WC, Seg::WU, Seg::WR, Seg::BC, Seg::BU, Seg::BR]
    } else {
        vec![Seg::WC, Seg::WU, Seg::BC, Seg::BU]
    }
}

/// Split a flat gradient vector into disjoint named mutable segment slices.
struct SegMap<'a, S> {
    entries: Vec<(Seg, &'a mut [S])>,
}

impl<'a, S> SegMap<'a, S> {
    fn remove(&mut self, seg: &Seg) -> &'a mut [S] {
        let pos = self
            .entries
            .iter()
            .position(|(s, _)| s == seg)
            .unwrap_or_else(|| panic!("segment {seg:?} not split out"));
        self.entries.swap_remove(pos).1
    }
}

fn split_segments<'a, S: Float>(
    grads: &'a mut [S],
    layout: &super::params::ParamLayout,
    segs: &[Seg],
) -> SegMap<'a, S> {
    // Sort requested segments by offset and peel slices off left to right.
    let mut ordered: Vec<(Seg, std::ops::Range<usize>)> =
        segs.iter().map(|s| (*s, layout.range(*s))).collect();
    ordered.sort_by_key(|(_, r)| r.start);
    let mut entries = Vec::with_capacity(ordered.len());
    let mut rest = grads;
    let mut consumed = 0;
    for (seg, range) in ordered {
        let (_, tail) = std::mem::take(&mut rest).split_at_mut(range.start - consumed);
        let (slice, tail) = tail.split_at_mut(range.len());
        entries.push((seg, slice));
        rest = tail;
        consumed = range.end;
    }
    SegMap { entries }
}

/// One prediction per window row; dropout stays off.
pub fn predict<S: Float>(
    net: &RecurrentNetwork<S>,
    data: &WindowedDataset<S>,
) -> Result<Vec<S>, NeuralError> {
    if data.lookback() != net.lookback() {
        return Err(NeuralError::LookbackMismatch { data: data.lookback(), net: net.lookback() });
    }
    (0..data.len()).map(|i| predict_one(net, data.feature_row(i))).collect()
}

/// Predict from a single window; dropout stays off.
pub fn predict_one<S: Float>(net: &RecurrentNetwork<S>, window: &[S]) -> Result<S, NeuralError> {
    Ok(forward(net, window)?.prediction)
}

fn training_rmse<S: Float>(net: &RecurrentNetwork<S>, data: &WindowedDataset<S>) -> S {
    let mut sq = S::zero();
    for (row, label) in data.rows() {
        let pred = forward(net, row).expect("window length checked against lookback").prediction;
        let e = pred - label;
        sq += e * e;
    }
    (sq / S::from_count(data.len())).sqrt()
}

/// Mini-batch backpropagation through time with ADAM.
///
/// The gradient is the batch mean of per-example MSE gradients (with the last
/// partial batch kept), optionally decayed and clipped by global norm. The
/// returned history holds the dropout-free training-set RMSE after each
/// epoch, in scaled units. Everything is deterministic given `cfg.seed`: the
/// shuffle and dropout streams are derived per epoch.
pub fn train<S: Float>(
    net: &mut RecurrentNetwork<S>,
    data: &WindowedDataset<S>,
    cfg: &TrainConfig,
) -> Result<Vec<S>, NeuralError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    if data.lookback() != net.lookback() {
        return Err(NeuralError::LookbackMismatch { data: data.lookback(), net: net.lookback() });
    }

    let n_params = net.params().len();
    let mut adam = AdamState::new(n_params, cfg.adam);
    let mut grads = vec![S::zero(); n_params];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history: Vec<S> = Vec::with_capacity(cfg.epochs);
    let rate = net.dropout_rate();

    let diverged = |history: &Vec<S>, completed: usize| NeuralError::Diverged {
        completed,
        last_rmse: history.last().map(|v| v.as_f64()).unwrap_or(f64::NAN),
    };

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            rng::shuffle(&mut rng::stream(cfg.seed, Stream::Shuffle, epoch as u64), &mut order);
        }
        let mut dropout_rng = rng::stream(cfg.seed, Stream::Dropout, epoch as u64);

        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = S::zero());
            let batch_len = S::from_count(batch.len());
            for &idx in batch {
                let window = data.feature_row(idx);
                let label = data.label(idx);
                let mask = (rate > 0.0)
                    .then(|| dropout_mask::<S>(net.hidden_units(), rate, &mut dropout_rng));
                let pass = forward_masked(net, window, mask.as_deref())?;
                let d_pred = (pass.prediction - label) * S::cast(2.0) / batch_len;
                backward_into(net, &pass, d_pred, mask.as_deref(), &mut grads);
            }
            if cfg.weight_decay > 0.0 {
                let lambda = S::cast(cfg.weight_decay) / batch_len;
                for (g, p) in grads.iter_mut().zip(net.params().iter()) {
                    *g += lambda * *p;
                }
            }
            if let Some(clip) = cfg.clip_norm {
                let clip = S::cast(clip);
                let norm = norm2(&grads);
                if norm > clip {
                    let scale = clip / norm;
                    grads.iter_mut().for_each(|g| *g *= scale);
                }
            }
            if adam_step(net.params_mut(), &grads, &mut adam).is_err() {
                return Err(diverged(&history, epoch));
            }
        }

        let rmse = training_rmse(net, data);
        if !rmse.is_finite() {
            return Err(diverged(&history, epoch));
        }
        history.push(rmse);
    }
    Ok(history)
}
