//! Box–Jenkins modeling: correlograms, ARMA estimation by conditional least
//! squares, Schwarz-criterion order selection and rolling one-step forecasts.

mod correlogram;
mod estimate;
mod forecast;
mod select;

pub use correlogram::{acf, pacf};
pub use estimate::{fit_arma, reflection_to_poly, poly_to_reflection, FitOptions};
pub use forecast::{difference, integrate, one_step_fitted, rolling_forecast};
pub use select::{select_order, OrderTable, OrderRow};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Float;

#[derive(Debug, Error)]
pub enum ArimaError {
    #[error("series too short: {got} observations, need {needed}")]
    TooShort { got: usize, needed: usize },
    #[error("max_lag {max_lag} too large for {n} observations (must be below n/2)")]
    LagTooLarge { max_lag: usize, n: usize },
    #[error("constant series has no correlation structure")]
    ConstantSeries,
    #[error("differencing order {d} needs more than {n} observations")]
    CannotDifference { d: usize, n: usize },
    #[error("optimizer failed to converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("estimated model violates {0} (root on or inside the unit circle)")]
    UnstableRoots(&'static str),
    #[error("order bounds too large: p_max={p_max}, q_max={q_max} (limit 12)")]
    OrderBoundsTooLarge { p_max: usize, q_max: usize },
    #[error("every (p,q) candidate failed; first error: {0}")]
    AllOrdersFailed(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("anchors length {got} does not match differencing order {d}")]
    BadAnchors { got: usize, d: usize },
}

/// Model order: AR lags `p`, differencing `d`, MA lags `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArmaSpec {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// Parameter count entering the information criterion (mean included).
    pub fn k(&self) -> usize {
        self.p + self.q + 1
    }
}

impl std::fmt::Display for ArmaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// A fitted ARMA model on the (possibly differenced) series handed to
/// [`fit_arma`].
///
/// Sign conventions: `y_t - mean = Σ ar_i (y_{t-i} - mean) + ε_t - Σ ma_j ε_{t-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaModel<S> {
    pub spec: ArmaSpec,
    pub mean: S,
    pub ar: Vec<S>,
    pub ma: Vec<S>,
    /// Innovation variance, CSS divided by the effective sample size.
    pub sigma2: S,
    /// Innovations from the conditional filter (first `p` are the zero
    /// pre-sample values).
    pub residuals: Vec<S>,
    /// The minimized conditional sum of squares.
    pub loglik_proxy: S,
    /// Effective sample size `n - p`.
    pub n_used: usize,
}

impl<S: Float> ArmaModel<S> {
    /// Schwarz information criterion `n ln(css/n) + k ln(n)` with
    /// `n = n_used`.
    pub fn sic(&self) -> f64 {
        let n = self.n_used as f64;
        let css = self.loglik_proxy.as_f64();
        n * (css / n).ln() + self.spec.k() as f64 * n.ln()
    }
}

/// Whether the AR polynomial `1 - Σ coeffs_i z^i` has all roots outside the
/// unit circle, via the step-down recursion (all reflection coefficients
/// strictly inside (-1, 1)).
pub fn is_stationary<S: Float>(coeffs: &[S]) -> bool {
    poly_to_reflection(coeffs).is_some()
}

/// Invertibility of the MA polynomial `1 - Σ coeffs_j z^j`; same criterion,
/// same convention.
pub fn is_invertible<S: Float>(coeffs: &[S]) -> bool {
    poly_to_reflection(coeffs).is_some()
}
