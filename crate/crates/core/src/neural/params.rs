//! Flat parameter storage and its per-cell layout.
//!
//! All weights and biases of a network live in one `Vec<S>`; the layout maps
//! named segments onto ranges of it. The flat view is what ADAM, gradient
//! clipping, finite-difference checks and serialization operate on, while the
//! cell math borrows typed slices through the layout. Segment order is part
//! of the serialization format and must not change.

use std::ops::Range;

use rand_chacha::ChaCha8Rng;

use crate::rng;
use crate::Float;

use super::CellKind;

/// Named parameter segments. Which ones exist depends on the cell kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seg {
    /// RNN activation-to-activation weights, `h × h`.
    WAa,
    /// RNN input-to-activation weights, `h × input`.
    WAx,
    /// RNN activation bias, `h`.
    BA,
    /// Candidate weights, `h × (h + input)`.
    WC,
    /// Update-gate weights.
    WU,
    /// Relevance-gate weights (full GRU only).
    WR,
    /// Forget-gate weights (LSTM only).
    WF,
    /// Output-gate weights (LSTM only).
    WO,
    /// Candidate bias, `h`.
    BC,
    /// Update-gate bias.
    BU,
    /// Relevance-gate bias.
    BR,
    /// Forget-gate bias.
    BF,
    /// Output-gate bias.
    BO,
    /// Output head weights, `1 × h`.
    WOut,
    /// Output head bias, scalar.
    BOut,
}

impl Seg {
    fn is_bias(self) -> bool {
        matches!(self, Seg::BA | Seg::BC | Seg::BU | Seg::BR | Seg::BF | Seg::BO | Seg::BOut)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SegmentInfo {
    seg: Seg,
    offset: usize,
    rows: usize,
    cols: usize,
}

/// Maps the named segments of one cell kind onto a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    kind: CellKind,
    hidden: usize,
    input: usize,
    segments: Vec<SegmentInfo>,
    len: usize,
}

impl ParamLayout {
    pub fn new(kind: CellKind, hidden: usize, input: usize) -> Self {
        assert!(hidden >= 1 && input >= 1);
        let gate_cols = hidden + input;
        let specs: Vec<(Seg, usize, usize)> = match kind {
            CellKind::Rnn => vec![
                (Seg::WAa, hidden, hidden),
                (Seg::WAx, hidden, input),
                (Seg::BA, hidden, 1),
                (Seg::WOut, 1, hidden),
                (Seg::BOut, 1, 1),
            ],
            CellKind::GruSimple => vec![
                (Seg::WC, hidden, gate_cols),
                (Seg::WU, hidden, gate_cols),
                (Seg::BC, hidden, 1),
                (Seg::BU, hidden, 1),
                (Seg::WOut, 1, hidden),
                (Seg::BOut, 1, 1),
            ],
            CellKind::GruFull => vec![
                (Seg::WC, hidden, gate_cols),
                (Seg::WU, hidden, gate_cols),
                (Seg::WR, hidden, gate_cols),
                (Seg::BC, hidden, 1),
                (Seg::BU, hidden, 1),
                (Seg::BR, hidden, 1),
                (Seg::WOut, 1, hidden),
                (Seg::BOut, 1, 1),
            ],
            CellKind::Lstm => vec![
                (Seg::WC, hidden, gate_cols),
                (Seg::WU, hidden, gate_cols),
                (Seg::WF, hidden, gate_cols),
                (Seg::WO, hidden, gate_cols),
                (Seg::BC, hidden, 1),
                (Seg::BU, hidden, 1),
                (Seg::BF, hidden, 1),
                (Seg::BO, hidden, 1),
                (Seg::WOut, 1, hidden),
                (Seg::BOut, 1, 1),
            ],
        };
        let mut segments = Vec::with_capacity(specs.len());
        let mut offset = 0;
        for (seg, rows, cols) in specs {
            segments.push(SegmentInfo { seg, offset, rows, cols });
            offset += rows * cols;
        }
        Self { kind, hidden, input, segments, len: offset }
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input(&self) -> usize {
        self.input
    }

    /// Total parameter count.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn info(&self, seg: Seg) -> &SegmentInfo {
        self.segments
            .iter()
            .find(|s| s.seg == seg)
            .unwrap_or_else(|| panic!("segment {seg:?} absent for {:?}", self.kind))
    }

    pub fn range(&self, seg: Seg) -> Range<usize> {
        let info = self.info(seg);
        info.offset..info.offset + info.rows * info.cols
    }

    pub fn shape(&self, seg: Seg) -> (usize, usize) {
        let info = self.info(seg);
        (info.rows, info.cols)
    }

    pub fn has(&self, seg: Seg) -> bool {
        self.segments.iter().any(|s| s.seg == seg)
    }

    /// Scaled-uniform bound `sqrt(6 / (fan_in + fan_out))` for a segment,
    /// where fan_in is the column count and fan_out the row count.
    pub fn init_bound(&self, seg: Seg) -> f64 {
        let info = self.info(seg);
        (6.0 / (info.rows + info.cols) as f64).sqrt()
    }

    /// Fresh parameter vector: weights uniform in the scaled bound, biases
    /// zero, drawn in segment order so the result is seed-deterministic.
    pub fn init_params<S: Float>(&self, rng: &mut ChaCha8Rng) -> Vec<S> {
        let mut params = vec![S::zero(); self.len];
        for info in &self.segments {
            if info.seg.is_bias() {
                continue;
            }
            let bound = S::cast((6.0 / (info.rows + info.cols) as f64).sqrt());
            for slot in &mut params[info.offset..info.offset + info.rows * info.cols] {
                *slot = rng::uniform_symmetric(rng, bound);
            }
        }
        params
    }
}
