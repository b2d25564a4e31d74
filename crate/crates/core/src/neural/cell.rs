//! Recurrent cell steps: forward passes with caches, and the matching
//! backward rules used by backpropagation through time.
//!
//! The per-cell functions are standalone and take explicit parameter views so
//! they can be exercised with hand-set weights; the network wrapper in
//! `train` borrows the same views out of its flat parameter vector.

use crate::linalg::{matvec_add, matvec_transpose_add, outer_add};
use crate::Float;

pub(crate) fn sigmoid<S: Float>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

/// Activation and memory vectors carried between steps.
///
/// `activation` is always the vector the output head consumes: the RNN and
/// LSTM hidden activation, or the GRU memory cell (which doubles as its
/// activation). `memory` is the memory cell proper; the RNN leaves it zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState<S> {
    pub activation: Vec<S>,
    pub memory: Vec<S>,
}

impl<S: Float> CellState<S> {
    pub fn zeros(hidden: usize) -> Self {
        Self { activation: vec![S::zero(); hidden], memory: vec![S::zero(); hidden] }
    }
}

/// RNN cell parameters (borrowed): Eqs. of the plain recurrent unit plus its
/// linear output map.
#[derive(Debug, Clone, Copy)]
pub struct RnnCellParams<'a, S> {
    /// `h × h`
    pub w_aa: &'a [S],
    /// `h × input`
    pub w_ax: &'a [S],
    /// `h`
    pub b_a: &'a [S],
    /// `1 × h`
    pub w_ya: &'a [S],
    pub b_y: S,
}

/// One gate: weights `h × (h + input)` and bias `h`.
#[derive(Debug, Clone, Copy)]
pub struct Gate<'a, S> {
    pub w: &'a [S],
    pub b: &'a [S],
}

#[derive(Debug, Clone, Copy)]
pub struct GruCellParams<'a, S> {
    pub candidate: Gate<'a, S>,
    pub update: Gate<'a, S>,
    /// Present only for the full variant.
    pub relevance: Option<Gate<'a, S>>,
}

#[derive(Debug, Clone, Copy)]
pub struct LstmCellParams<'a, S> {
    pub candidate: Gate<'a, S>,
    pub update: Gate<'a, S>,
    pub forget: Gate<'a, S>,
    pub output: Gate<'a, S>,
}

#[derive(Debug, Clone)]
pub struct RnnStepCache<S> {
    x: Vec<S>,
    a_prev: Vec<S>,
    a_new: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct GruStepCache<S> {
    /// `[c_prev, x]`
    z: Vec<S>,
    /// Candidate input: `[Γr ∘ c_prev, x]` for the full variant, `z` otherwise.
    candidate_input: Vec<S>,
    gamma_u: Vec<S>,
    gamma_r: Option<Vec<S>>,
    c_tilde: Vec<S>,
    c_prev: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct LstmStepCache<S> {
    /// `[a_prev, x]`
    z: Vec<S>,
    gamma_u: Vec<S>,
    gamma_f: Vec<S>,
    gamma_o: Vec<S>,
    c_tilde: Vec<S>,
    c_prev: Vec<S>,
    tanh_c_new: Vec<S>,
}

/// Cache of one unrolled step, kept for the backward pass.
#[derive(Debug, Clone)]
pub enum StepCache<S> {
    Rnn(RnnStepCache<S>),
    Gru(GruStepCache<S>),
    Lstm(LstmStepCache<S>),
}

fn concat<S: Float>(state: &[S], x: &[S]) -> Vec<S> {
    let mut z = Vec::with_capacity(state.len() + x.len());
    z.extend_from_slice(state);
    z.extend_from_slice(x);
    z
}

fn gate_eval<S: Float>(gate: &Gate<'_, S>, z: &[S], hidden: usize, squash: fn(S) -> S) -> Vec<S> {
    let mut out = gate.b.to_vec();
    matvec_add(gate.w, hidden, z.len(), z, &mut out);
    for v in &mut out {
        *v = squash(*v);
    }
    out
}

/// Plain RNN step: `a = tanh(W_aa a_prev + W_ax x + b_a)`, `y = W_ya a + b_y`
/// with a linear output for regression.
pub fn rnn_cell_forward<S: Float>(
    x: &[S],
    state: &CellState<S>,
    params: &RnnCellParams<'_, S>,
) -> (CellState<S>, S, StepCache<S>) {
    let hidden = state.activation.len();
    let mut pre = params.b_a.to_vec();
    matvec_add(params.w_aa, hidden, hidden, &state.activation, &mut pre);
    matvec_add(params.w_ax, hidden, x.len(), x, &mut pre);
    let a_new: Vec<S> = pre.into_iter().map(|v| v.tanh()).collect();

    let mut y = params.b_y;
    for (w, a) in params.w_ya.iter().zip(a_new.iter()) {
        y = y + *w * *a;
    }

    let cache = StepCache::Rnn(RnnStepCache {
        x: x.to_vec(),
        a_prev: state.activation.clone(),
        a_new: a_new.clone(),
    });
    let next = CellState { activation: a_new, memory: vec![S::zero(); hidden] };
    (next, y, cache)
}

/// GRU step. The simple variant mixes a candidate into the memory cell through
/// the update gate; the full variant additionally gates the previous memory
/// inside the candidate through the relevance gate.
pub fn gru_cell_forward<S: Float>(
    x: &[S],
    state: &CellState<S>,
    params: &GruCellParams<'_, S>,
) -> (CellState<S>, StepCache<S>) {
    let hidden = state.memory.len();
    let c_prev = &state.memory;
    let z = concat(c_prev, x);

    let gamma_u = gate_eval(&params.update, &z, hidden, sigmoid);
    let (candidate_input, gamma_r) = match &params.relevance {
        Some(rel) => {
            let gamma_r = gate_eval(rel, &z, hidden, sigmoid);
            let gated: Vec<S> =
                gamma_r.iter().zip(c_prev.iter()).map(|(g, c)| *g * *c).collect();
            (concat(&gated, x), Some(gamma_r))
        }
        None => (z.clone(), None),
    };
    let c_tilde = gate_eval(&params.candidate, &candidate_input, hidden, |v| v.tanh());

    let c_new: Vec<S> = (0..hidden)
        .map(|j| gamma_u[j] * c_tilde[j] + (S::one() - gamma_u[j]) * c_prev[j])
        .collect();

    let cache = StepCache::Gru(GruStepCache {
        z,
        candidate_input,
        gamma_u,
        gamma_r,
        c_tilde,
        c_prev: c_prev.clone(),
    });
    let next = CellState { activation: c_new.clone(), memory: c_new };
    (next, cache)
}

/// LSTM step: candidate plus update/forget/output gates, memory mixed as
/// `c = Γu ∘ c̃ + Γf ∘ c_prev`, activation `a = Γo ∘ tanh(c)`.
pub fn lstm_cell_forward<S: Float>(
    x: &[S],
    state: &CellState<S>,
    params: &LstmCellParams<'_, S>,
) -> (CellState<S>, StepCache<S>) {
    let hidden = state.activation.len();
    let z = concat(&state.activation, x);

    let c_tilde = gate_eval(&params.candidate, &z, hidden, |v| v.tanh());
    let gamma_u = gate_eval(&params.update, &z, hidden, sigmoid);
    let gamma_f = gate_eval(&params.forget, &z, hidden, sigmoid);
    let gamma_o = gate_eval(&params.output, &z, hidden, sigmoid);

    let c_new: Vec<S> = (0..hidden)
        .map(|j| gamma_u[j] * c_tilde[j] + gamma_f[j] * state.memory[j])
        .collect();
    let tanh_c_new: Vec<S> = c_new.iter().map(|v| v.tanh()).collect();
    let a_new: Vec<S> = (0..hidden).map(|j| gamma_o[j] * tanh_c_new[j]).collect();

    let cache = StepCache::Lstm(LstmStepCache {
        z,
        gamma_u,
        gamma_f,
        gamma_o,
        c_tilde,
        c_prev: state.memory.clone(),
        tanh_c_new: tanh_c_new.clone(),
    });
    let next = CellState { activation: a_new, memory: c_new };
    (next, cache)
}

/// Mutable gradient views mirroring [`RnnCellParams`] (cell portion only).
pub(crate) struct RnnCellGrads<'a, S> {
    pub w_aa: &'a mut [S],
    pub w_ax: &'a mut [S],
    pub b_a: &'a mut [S],
}

pub(crate) struct GateGrads<'a, S> {
    pub w: &'a mut [S],
    pub b: &'a mut [S],
}

pub(crate) struct GruCellGrads<'a, S> {
    pub candidate: GateGrads<'a, S>,
    pub update: GateGrads<'a, S>,
    pub relevance: Option<GateGrads<'a, S>>,
}

pub(crate) struct LstmCellGrads<'a, S> {
    pub candidate: GateGrads<'a, S>,
    pub update: GateGrads<'a, S>,
    pub forget: GateGrads<'a, S>,
    pub output: GateGrads<'a, S>,
}

/// Backward through one RNN step. `d_a` is the gradient on the new activation;
/// returns the gradient on the previous activation.
pub(crate) fn rnn_cell_backward<S: Float>(
    cache: &RnnStepCache<S>,
    d_a: &[S],
    w_aa: &[S],
    grads: &mut RnnCellGrads<'_, S>,
) -> Vec<S> {
    let hidden = cache.a_new.len();
    let d_pre: Vec<S> = (0..hidden)
        .map(|j| d_a[j] * (S::one() - cache.a_new[j] * cache.a_new[j]))
        .collect();
    outer_add(grads.w_aa, &d_pre, &cache.a_prev);
    outer_add(grads.w_ax, &d_pre, &cache.x);
    for (g, d) in grads.b_a.iter_mut().zip(d_pre.iter()) {
        *g += *d;
    }
    let mut d_a_prev = vec![S::zero(); hidden];
    matvec_transpose_add(w_aa, hidden, hidden, &d_pre, &mut d_a_prev);
    d_a_prev
}

fn sigmoid_backprop<S: Float>(d_gate: &[S], gate: &[S]) -> Vec<S> {
    d_gate
        .iter()
        .zip(gate.iter())
        .map(|(d, g)| *d * *g * (S::one() - *g))
        .collect()
}

/// Backward through one GRU step. `d_c` is the gradient on the new memory
/// cell; returns the gradient on the previous one.
pub(crate) fn gru_cell_backward<S: Float>(
    cache: &GruStepCache<S>,
    d_c: &[S],
    params: &GruCellParams<'_, S>,
    grads: &mut GruCellGrads<'_, S>,
) -> Vec<S> {
    let hidden = cache.c_prev.len();
    let z_len = cache.z.len();

    let d_gamma_u: Vec<S> = (0..hidden)
        .map(|j| d_c[j] * (cache.c_tilde[j] - cache.c_prev[j]))
        .collect();
    let d_c_tilde: Vec<S> = (0..hidden).map(|j| d_c[j] * cache.gamma_u[j]).collect();

    let d_pre_c: Vec<S> = (0..hidden)
        .map(|j| d_c_tilde[j] * (S::one() - cache.c_tilde[j] * cache.c_tilde[j]))
        .collect();
    let d_pre_u = sigmoid_backprop(&d_gamma_u, &cache.gamma_u);

    outer_add(grads.candidate.w, &d_pre_c, &cache.candidate_input);
    for (g, d) in grads.candidate.b.iter_mut().zip(d_pre_c.iter()) {
        *g += *d;
    }
    outer_add(grads.update.w, &d_pre_u, &cache.z);
    for (g, d) in grads.update.b.iter_mut().zip(d_pre_u.iter()) {
        *g += *d;
    }

    let mut d_candidate_input = vec![S::zero(); z_len];
    matvec_transpose_add(params.candidate.w, hidden, z_len, &d_pre_c, &mut d_candidate_input);
    let mut d_z = vec![S::zero(); z_len];
    matvec_transpose_add(params.update.w, hidden, z_len, &d_pre_u, &mut d_z);

    // Mixture-rule path into the previous cell.
    let mut d_c_prev: Vec<S> = (0..hidden)
        .map(|j| d_c[j] * (S::one() - cache.gamma_u[j]))
        .collect();

    match (&params.relevance, &cache.gamma_r, &mut grads.relevance) {
        (Some(rel), Some(gamma_r), Some(rel_grads)) => {
            // Candidate input was [Γr ∘ c_prev, x].
            let d_gated = &d_candidate_input[..hidden];
            let d_gamma_r: Vec<S> =
                (0..hidden).map(|j| d_gated[j] * cache.c_prev[j]).collect();
            for j in 0..hidden {
                d_c_prev[j] += d_gated[j] * gamma_r[j];
            }
            let d_pre_r = sigmoid_backprop(&d_gamma_r, gamma_r);
            outer_add(rel_grads.w, &d_pre_r, &cache.z);
            for (g, d) in rel_grads.b.iter_mut().zip(d_pre_r.iter()) {
                *g += *d;
            }
            matvec_transpose_add(rel.w, hidden, z_len, &d_pre_r, &mut d_z);
            // The x-portion of the candidate input flows straight to d_z.
            for j in hidden..z_len {
                d_z[j] += d_candidate_input[j];
            }
        }
        _ => {
            // Simple variant: candidate input was z itself.
            for j in 0..z_len {
                d_z[j] += d_candidate_input[j];
            }
        }
    }

    for (acc, dz) in d_c_prev.iter_mut().zip(d_z[..hidden].iter()) {
        *acc += *dz;
    }
    d_c_prev
}

/// Backward through one LSTM step. `d_a` is the gradient on the activation,
/// `d_c` the gradient carried on the memory cell; returns the pair for the
/// previous step.
pub(crate) fn lstm_cell_backward<S: Float>(
    cache: &LstmStepCache<S>,
    d_a: &[S],
    d_c_carry: &[S],
    params: &LstmCellParams<'_, S>,
    grads: &mut LstmCellGrads<'_, S>,
) -> (Vec<S>, Vec<S>) {
    let hidden = cache.c_prev.len();
    let z_len = cache.z.len();

    let d_gamma_o: Vec<S> = (0..hidden).map(|j| d_a[j] * cache.tanh_c_new[j]).collect();
    let d_c: Vec<S> = (0..hidden)
        .map(|j| {
            d_c_carry[j]
                + d_a[j] * cache.gamma_o[j] * (S::one() - cache.tanh_c_new[j] * cache.tanh_c_new[j])
        })
        .collect();

    let d_gamma_u: Vec<S> = (0..hidden).map(|j| d_c[j] * cache.c_tilde[j]).collect();
    let d_gamma_f: Vec<S> = (0..hidden).map(|j| d_c[j] * cache.c_prev[j]).collect();
    let d_c_tilde: Vec<S> = (0..hidden).map(|j| d_c[j] * cache.gamma_u[j]).collect();

    let d_pre_c: Vec<S> = (0..hidden)
        .map(|j| d_c_tilde[j] * (S::one() - cache.c_tilde[j] * cache.c_tilde[j]))
        .collect();
    let d_pre_u = sigmoid_backprop(&d_gamma_u, &cache.gamma_u);
    let d_pre_f = sigmoid_backprop(&d_gamma_f, &cache.gamma_f);
    let d_pre_o = sigmoid_backprop(&d_gamma_o, &cache.gamma_o);

    let mut d_z = vec![S::zero(); z_len];
    for (gate, pre, grad) in [
        (&params.candidate, &d_pre_c, &mut grads.candidate),
        (&params.update, &d_pre_u, &mut grads.update),
        (&params.forget, &d_pre_f, &mut grads.forget),
        (&params.output, &d_pre_o, &mut grads.output),
    ] {
        outer_add(grad.w, pre, &cache.z);
        for (g, d) in grad.b.iter_mut().zip(pre.iter()) {
            *g += *d;
        }
        matvec_transpose_add(gate.w, hidden, z_len, pre, &mut d_z);
    }

    let d_a_prev = d_z[..hidden].to_vec();
    let d_c_prev: Vec<S> = (0..hidden).map(|j| d_c[j] * cache.gamma_f[j]).collect();
    (d_a_prev, d_c_prev)
}

impl<S: Float> StepCache<S> {
    pub(crate) fn as_rnn(&self) -> &RnnStepCache<S> {
        match self {
            StepCache::Rnn(c) => c,
            _ => panic!("cache kind mismatch"),
        }
    }

    pub(crate) fn as_gru(&self) -> &GruStepCache<S> {
        match self {
            StepCache::Gru(c) => c,
            _ => panic!("cache kind mismatch"),
        }
    }

    pub(crate) fn as_lstm(&self) -> &LstmStepCache<S> {
        match self {
            StepCache::Lstm(c) => c,
            _ => panic!("cache kind mismatch"),
        }
    }

    /// Gate values of this step, for range diagnostics.
    pub fn gate_values(&self) -> Vec<&[S]> {
        match self {
            StepCache::Rnn(_) => vec![],
            StepCache::Gru(c) => {
                let mut gates = vec![c.gamma_u.as_slice()];
                if let Some(r) = &c.gamma_r {
                    gates.push(r.as_slice());
                }
                gates
            }
            StepCache::Lstm(c) => {
                vec![c.gamma_u.as_slice(), c.gamma_f.as_slice(), c.gamma_o.as_slice()]
            }
        }
    }

    /// Candidate (`c̃`) values of this step, if the cell has one.
    pub fn candidate_values(&self) -> Option<&[S]> {
        match self {
            StepCache::Rnn(_) => None,
            StepCache::Gru(c) => Some(&c.c_tilde),
            StepCache::Lstm(c) => Some(&c.c_tilde),
        }
    }
}
