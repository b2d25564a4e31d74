//! Commodity price forecasting toolkit.
//!
//! The crate ties together four strands of a monthly-price forecasting
//! pipeline:
//!
//! * [`data`] — CSV ingestion, chronological train/test splitting, min-max
//!   scaling and sliding-window supervised datasets;
//! * [`neural`] — recurrent networks (RNN, GRU, LSTM) written from scratch,
//!   trained by backpropagation-through-time with ADAM, plus a grid-search
//!   driver;
//! * [`arima`] and [`unitroot`] — Box–Jenkins modeling with Schwarz-criterion
//!   order selection, preceded by a breakpoint Dickey–Fuller unit-root test
//!   with Monte-Carlo p-values;
//! * [`evaluation`] and [`combine`] — RMSE/MAPE, the Harvey–Leybourne–Newbold
//!   test of equal predictive accuracy, and four forecast-averaging schemes.
//!
//! All numeric code is generic over the scalar type through the [`Float`]
//! trait; concrete aliases for the common instantiations live at the crate
//! root. `f64` is the default for anything statistical, `f32` is adequate for
//! network training.

pub mod arima;
pub mod combine;
pub mod data;
pub mod evaluation;
pub mod linalg;
pub mod month;
pub mod neural;
pub mod rng;
pub mod unitroot;

use std::fmt;
use std::iter::Sum;

/// Floating-point scalar the numeric core is generic over.
///
/// Implemented for `f32` and `f64`. The bound set mirrors what the math
/// actually needs: arithmetic, transcendentals (through `num_traits::Float`),
/// conversions from literals, summation and printing.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssignOps
    + Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Shorthand for converting an `f64` constant into `Self`.
    fn cast(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Lossy view of the value as `f64` (exact for `f32` and `f64`).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Conversion from a sample-size-like count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Float for f32 {}
impl Float for f64 {}

pub use data::{MinMaxScaler, PriceSeries, WindowedDataset};
pub use evaluation::ForecastSet;
pub use neural::{CellKind, RecurrentNetwork, TrainConfig};

/// Single-precision network, the cheap option for large sweeps.
pub type RecurrentNetwork32 = neural::RecurrentNetwork<f32>;
/// Double-precision network, used by gradient checks and the default CLI path.
pub type RecurrentNetwork64 = neural::RecurrentNetwork<f64>;
/// Double-precision ARMA model.
pub type ArmaModel64 = arima::ArmaModel<f64>;
/// Double-precision breakpoint unit-root result.
pub type BreakAdfResult64 = unitroot::BreakAdfResult<f64>;
