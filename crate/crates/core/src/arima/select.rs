//! Order selection over a (p, q) grid by the Schwarz information criterion.

use rayon::prelude::*;
use serde::Serialize;

use crate::Float;

use super::estimate::{fit_arma, FitOptions};
use super::{ArimaError, ArmaSpec};

pub const MAX_ORDER_BOUND: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct OrderRow {
    pub p: usize,
    pub q: usize,
    pub css: Option<f64>,
    pub sic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OrderTable {
    /// All grid points in (p, q) lexicographic order.
    pub rows: Vec<OrderRow>,
    pub best: ArmaSpec,
    pub best_sic: f64,
}

/// Fit every (p, q) up to the bounds and return the SIC table plus the
/// argmin. Failed fits stay in the table with their error and are excluded
/// from the argmin; ties prefer the smaller model (p + q, then p).
pub fn select_order<S: Float>(
    series: &[S],
    p_max: usize,
    q_max: usize,
    opts: &FitOptions,
    parallel: bool,
) -> Result<OrderTable, ArimaError> {
    if p_max > MAX_ORDER_BOUND || q_max > MAX_ORDER_BOUND {
        return Err(ArimaError::OrderBoundsTooLarge { p_max, q_max });
    }
    let grid: Vec<(usize, usize)> =
        (0..=p_max).flat_map(|p| (0..=q_max).map(move |q| (p, q))).collect();

    let fit_one = |&(p, q): &(usize, usize)| -> OrderRow {
        match fit_arma(series, ArmaSpec::new(p, 0, q), opts) {
            Ok(model) => OrderRow {
                p,
                q,
                css: Some(model.loglik_proxy.as_f64()),
                sic: Some(model.sic()),
                error: None,
            },
            Err(err) => OrderRow { p, q, css: None, sic: None, error: Some(err.to_string()) },
        }
    };

    let rows: Vec<OrderRow> = if parallel {
        grid.par_iter().map(fit_one).collect()
    } else {
        grid.iter().map(fit_one).collect()
    };

    let best = rows
        .iter()
        .filter_map(|r| r.sic.map(|sic| (sic, r.p + r.q, r.p, r.q)))
        .min_by(|a, b| a.partial_cmp(b).expect("finite SIC values"));
    match best {
        Some((best_sic, _, p, q)) => {
            Ok(OrderTable { rows, best: ArmaSpec::new(p, 0, q), best_sic })
        }
        None => {
            let first = rows
                .iter()
                .find_map(|r| r.error.clone())
                .unwrap_or_else(|| "empty grid".to_string());
            Err(ArimaError::AllOrdersFailed(first))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::sim;
    use crate::rng::{stream, Stream};

    #[test]
    fn sic_penalty_is_monotone_in_model_size() {
        // Same CSS, larger k: the criterion must strictly increase.
        let n = 500.0f64;
        let css = 123.4f64;
        let sic = |k: f64| n * (css / n).ln() + k * n.ln();
        assert!(sic(2.0) > sic(1.0));
        assert!(sic(5.0) > sic(4.0));
    }

    #[test]
    fn white_noise_prefers_the_empty_model() {
        let mut r = stream(3, Stream::Simulation, 40);
        let y = sim::arma::<f64>(500, 0.0, &[], &[], 1.0, &mut r);
        let table = select_order(&y, 2, 2, &FitOptions::default(), false).unwrap();
        assert_eq!((table.best.p, table.best.q), (0, 0));
        assert_eq!(table.rows.len(), 9);
    }

    #[test]
    fn ar2_data_selects_at_least_two_ar_lags() {
        let mut r = stream(3, Stream::Simulation, 41);
        let y = sim::arma::<f64>(2000, 0.0, &[0.5, 0.3], &[], 1.0, &mut r);
        let table = select_order(&y, 4, 2, &FitOptions::default(), false).unwrap();
        assert!(table.best.p >= 2, "selected {}", table.best);
        assert!(table.best.q <= 1, "selected {}", table.best);
    }

    #[test]
    fn parallel_selection_matches_serial() {
        let mut r = stream(3, Stream::Simulation, 42);
        let y = sim::arma::<f64>(400, 1.0, &[0.6], &[], 1.0, &mut r);
        let serial = select_order(&y, 2, 2, &FitOptions::default(), false).unwrap();
        let parallel = select_order(&y, 2, 2, &FitOptions::default(), true).unwrap();
        assert_eq!(serial.best, parallel.best);
        for (a, b) in serial.rows.iter().zip(parallel.rows.iter()) {
            assert_eq!((a.p, a.q), (b.p, b.q));
            assert_eq!(a.sic, b.sic);
        }
    }

    #[test]
    fn oversized_bounds_are_rejected() {
        let y = vec![0.0f64; 100];
        assert!(matches!(
            select_order(&y, 13, 2, &FitOptions::default(), false),
            Err(ArimaError::OrderBoundsTooLarge { .. })
        ));
    }
}
