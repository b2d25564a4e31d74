//! Forecast averaging: simple mean, least-squares weights, inverse-MSE
//! weights and inverse-rank weights, plus the comparison report against the
//! individual models.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{mape, rmse, EvaluationError, ForecastSet};
use crate::linalg::{ols, LinalgError};
use crate::Float;

#[derive(Debug, Error)]
pub enum CombineError {
    #[error("need at least {needed} forecasts, got {got}")]
    TooFewForecasts { needed: usize, got: usize },
    #[error("fit window {start}..{end} invalid for {len} observations")]
    BadWindow { start: usize, end: usize, len: usize },
    #[error("fit window too short: {got} rows for {k} forecasts plus intercept")]
    WindowTooShort { got: usize, k: usize },
    #[error("singular least-squares design (collinear forecasts); diagnostic ratio {ratio:.3e}")]
    Collinear { ratio: f64 },
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
}

/// The averaging schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SimpleMean,
    LeastSquares,
    InverseMse,
    MseRanks,
}

impl Scheme {
    pub const ALL: [Scheme; 4] =
        [Scheme::SimpleMean, Scheme::LeastSquares, Scheme::InverseMse, Scheme::MseRanks];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::SimpleMean => "simple_mean",
            Scheme::LeastSquares => "least_squares",
            Scheme::InverseMse => "inverse_mse",
            Scheme::MseRanks => "mse_ranks",
        }
    }
}

/// Index range (half-open) over the forecast set used to estimate weights.
pub type FitWindow = std::ops::Range<usize>;

/// A combined forecast and how it was weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationResult<S> {
    pub scheme: Scheme,
    /// Per-forecast coefficients, in the forecast set's order.
    pub weights: Vec<S>,
    /// Regression intercept (least squares only).
    pub intercept: Option<S>,
    pub combined: Vec<S>,
    pub fit_window: FitWindow,
    /// Set when a zero-MSE forecast forced a degenerate weight of one.
    pub degenerate: bool,
}

fn check_window<S: Float>(set: &ForecastSet<S>, window: &FitWindow) -> Result<(), CombineError> {
    if window.start >= window.end || window.end > set.len() {
        return Err(CombineError::BadWindow {
            start: window.start,
            end: window.end,
            len: set.len(),
        });
    }
    Ok(())
}

fn require_k<S: Float>(set: &ForecastSet<S>, needed: usize) -> Result<usize, CombineError> {
    let k = set.forecasts().len();
    if k < needed {
        return Err(CombineError::TooFewForecasts { needed, got: k });
    }
    Ok(k)
}

fn weighted_sum<S: Float>(set: &ForecastSet<S>, weights: &[S], intercept: S) -> Vec<S> {
    let n = set.len();
    let mut combined = vec![intercept; n];
    for ((_, series), w) in set.forecasts().iter().zip(weights.iter()) {
        for (c, f) in combined.iter_mut().zip(series.iter()) {
            *c += *w * *f;
        }
    }
    combined
}

/// Equal weights `1/k` at every observation.
pub fn combine_simple_mean<S: Float>(set: &ForecastSet<S>) -> Result<CombinationResult<S>, CombineError> {
    let k = require_k(set, 2)?;
    let w = S::one() / S::from_count(k);
    let weights = vec![w; k];
    let combined = weighted_sum(set, &weights, S::zero());
    Ok(CombinationResult {
        scheme: Scheme::SimpleMean,
        weights,
        intercept: None,
        combined,
        fit_window: 0..set.len(),
        degenerate: false,
    })
}

/// Regress the actuals on an intercept plus all forecasts over the fit
/// window; the coefficients become the weights, applied over the full range.
pub fn combine_least_squares<S: Float>(
    set: &ForecastSet<S>,
    fit_window: FitWindow,
) -> Result<CombinationResult<S>, CombineError> {
    let k = require_k(set, 2)?;
    check_window(set, &fit_window)?;
    let rows = fit_window.len();
    if rows <= k + 1 {
        return Err(CombineError::WindowTooShort { got: rows, k });
    }

    let cols = k + 1;
    let mut design = Vec::with_capacity(rows * cols);
    for t in fit_window.clone() {
        design.push(S::one());
        for (_, series) in set.forecasts() {
            design.push(series[t]);
        }
    }
    let target = &set.actual()[fit_window.clone()];
    let fit = match ols(&design, rows, cols, target) {
        Ok(fit) => fit,
        Err(LinalgError::Singular { .. }) => {
            // Report the conditioning diagnostic from the gram diagonal.
            let probe = ols(&design, rows, cols, target);
            let ratio = match probe {
                Ok(f) => f.gram_diag_ratio.as_f64(),
                Err(_) => f64::INFINITY,
            };
            return Err(CombineError::Collinear { ratio });
        }
        Err(LinalgError::Dimension(msg)) => {
            return Err(CombineError::BadWindow {
                start: fit_window.start,
                end: fit_window.end,
                len: msg.len(),
            })
        }
    };

    let intercept = fit.coefficients[0];
    let weights = fit.coefficients[1..].to_vec();
    let combined = weighted_sum(set, &weights, intercept);
    Ok(CombinationResult {
        scheme: Scheme::LeastSquares,
        weights,
        intercept: Some(intercept),
        combined,
        fit_window,
        degenerate: false,
    })
}

fn window_mses<S: Float>(set: &ForecastSet<S>, window: &FitWindow) -> Vec<S> {
    let actual = &set.actual()[window.clone()];
    set.forecasts()
        .iter()
        .map(|(_, series)| {
            let seg = &series[window.clone()];
            let sq: S =
                actual.iter().zip(seg.iter()).map(|(a, p)| (*a - *p) * (*a - *p)).sum();
            sq / S::from_count(actual.len())
        })
        .collect()
}

/// Weights proportional to inverse MSE over the fit window, normalized to
/// sum to one. A zero-MSE (perfect) forecast takes weight one and the result
/// is flagged degenerate rather than errored.
pub fn combine_inverse_mse<S: Float>(
    set: &ForecastSet<S>,
    fit_window: FitWindow,
) -> Result<CombinationResult<S>, CombineError> {
    let k = require_k(set, 2)?;
    check_window(set, &fit_window)?;
    let mses = window_mses(set, &fit_window);

    let (weights, degenerate) = if let Some(perfect) = mses.iter().position(|m| *m == S::zero()) {
        let mut w = vec![S::zero(); k];
        w[perfect] = S::one();
        (w, true)
    } else {
        let inv: Vec<S> = mses.iter().map(|m| S::one() / *m).collect();
        let total: S = inv.iter().copied().sum();
        (inv.into_iter().map(|v| v / total).collect(), false)
    };

    let combined = weighted_sum(set, &weights, S::zero());
    Ok(CombinationResult {
        scheme: Scheme::InverseMse,
        weights,
        intercept: None,
        combined,
        fit_window,
        degenerate,
    })
}

/// Rank forecasts by MSE over the fit window (rank 1 = lowest, ties broken by
/// input order) and weight by normalized inverse rank, so the best forecast
/// carries the largest weight.
pub fn combine_mse_ranks<S: Float>(
    set: &ForecastSet<S>,
    fit_window: FitWindow,
) -> Result<CombinationResult<S>, CombineError> {
    let k = require_k(set, 2)?;
    check_window(set, &fit_window)?;
    let mses = window_mses(set, &fit_window);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        mses[a].partial_cmp(&mses[b]).expect("finite MSEs").then(a.cmp(&b))
    });
    let mut ranks = vec![0usize; k];
    for (rank0, &idx) in order.iter().enumerate() {
        ranks[idx] = rank0 + 1;
    }

    let inv: Vec<S> = ranks.iter().map(|r| S::one() / S::from_count(*r)).collect();
    let total: S = inv.iter().copied().sum();
    let weights: Vec<S> = inv.into_iter().map(|v| v / total).collect();

    let combined = weighted_sum(set, &weights, S::zero());
    Ok(CombinationResult {
        scheme: Scheme::MseRanks,
        weights,
        intercept: None,
        combined,
        fit_window,
        degenerate: false,
    })
}

pub fn combine<S: Float>(
    scheme: Scheme,
    set: &ForecastSet<S>,
    fit_window: FitWindow,
) -> Result<CombinationResult<S>, CombineError> {
    match scheme {
        Scheme::SimpleMean => combine_simple_mean(set),
        Scheme::LeastSquares => combine_least_squares(set, fit_window),
        Scheme::InverseMse => combine_inverse_mse(set, fit_window),
        Scheme::MseRanks => combine_mse_ranks(set, fit_window),
    }
}

/// One row of the combination report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    pub is_combination: bool,
    pub rmse: f64,
    pub mape: Option<f64>,
    pub best_rmse: bool,
    pub best_mape: bool,
}

/// Metrics per scheme and per individual model over the evaluation window.
#[derive(Debug, Clone)]
pub struct CombinationReport<S> {
    pub rows: Vec<ReportRow>,
    pub combinations: Vec<CombinationResult<S>>,
    /// Errors from schemes that could not run (for example a singular
    /// least-squares design for duplicated forecasts).
    pub skipped: Vec<(Scheme, String)>,
}

/// Evaluate every scheme plus the individual forecasts.
///
/// Weights are estimated over `fit_window` and metrics reported over
/// `eval_window` (by default both are the full range, the in-sample
/// convention that lets a combination beat every individual model). With a
/// single forecast the report degenerates to that model's own metrics.
pub fn evaluate_combinations<S: Float>(
    set: &ForecastSet<S>,
    fit_window: FitWindow,
    eval_window: FitWindow,
) -> Result<CombinationReport<S>, CombineError> {
    check_window(set, &fit_window)?;
    check_window(set, &eval_window)?;
    let actual_eval = &set.actual()[eval_window.clone()];
    let mape_defined = actual_eval.iter().all(|a| *a != S::zero());

    let metrics = |series: &[S]| -> Result<(f64, Option<f64>), CombineError> {
        let seg = &series[eval_window.clone()];
        let r = rmse(actual_eval, seg)?.as_f64();
        let m = if mape_defined { Some(mape(actual_eval, seg)?.as_f64()) } else { None };
        Ok((r, m))
    };

    let mut rows = Vec::new();
    for (name, series) in set.forecasts() {
        let (r, m) = metrics(series)?;
        rows.push(ReportRow {
            name: name.clone(),
            is_combination: false,
            rmse: r,
            mape: m,
            best_rmse: false,
            best_mape: false,
        });
    }

    let mut combinations = Vec::new();
    let mut skipped = Vec::new();
    if set.forecasts().len() >= 2 {
        for scheme in Scheme::ALL {
            match combine(scheme, set, fit_window.clone()) {
                Ok(result) => {
                    let (r, m) = metrics(&result.combined)?;
                    rows.push(ReportRow {
                        name: scheme.name().to_string(),
                        is_combination: true,
                        rmse: r,
                        mape: m,
                        best_rmse: false,
                        best_mape: false,
                    });
                    combinations.push(result);
                }
                Err(err) => skipped.push((scheme, err.to_string())),
            }
        }
    }

    if let Some(best) = rows
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.rmse.partial_cmp(&b.rmse).expect("finite rmse"))
        .map(|(i, _)| i)
    {
        rows[best].best_rmse = true;
    }
    let mape_known: Vec<usize> =
        rows.iter().enumerate().filter(|(_, r)| r.mape.is_some()).map(|(i, _)| i).collect();
    if let Some(&best) = mape_known.iter().min_by(|&&a, &&b| {
        rows[a].mape.unwrap().partial_cmp(&rows[b].mape.unwrap()).expect("finite mape")
    }) {
        rows[best].best_mape = true;
    }

    Ok(CombinationReport { rows, combinations, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::Month;

    fn dates(n: usize) -> Vec<Month> {
        let mut out = Vec::new();
        let mut m: Month = "2015-01".parse().unwrap();
        for _ in 0..n {
            out.push(m);
            m = m.succ();
        }
        out
    }

    fn set_of(actual: Vec<f64>, forecasts: Vec<(&str, Vec<f64>)>) -> ForecastSet<f64> {
        ForecastSet::new(
            dates(actual.len()),
            actual,
            forecasts.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn simple_mean_averages_pointwise() {
        let set = set_of(
            vec![0.0; 4],
            vec![("a", vec![1.0; 4]), ("b", vec![3.0; 4])],
        );
        let result = combine_simple_mean(&set).unwrap();
        assert_eq!(result.combined, vec![2.0; 4]);
        assert_eq!(result.weights, vec![0.5, 0.5]);

        let trio = set_of(
            vec![0.0; 3],
            vec![("a", vec![1.0; 3]), ("b", vec![2.0; 3]), ("c", vec![3.0; 3])],
        );
        assert_eq!(combine_simple_mean(&trio).unwrap().combined, vec![2.0; 3]);
    }

    #[test]
    fn identical_forecasts_pass_through_every_nonsingular_scheme() {
        let f = vec![1.5, 2.5, 3.5, 4.5, 5.5, 6.5];
        let set = set_of(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![("a", f.clone()), ("b", f.clone())],
        );
        let n = set.len();
        assert_eq!(combine_simple_mean(&set).unwrap().combined, f);
        assert_eq!(combine_inverse_mse(&set, 0..n).unwrap().combined, f);
        assert_eq!(combine_mse_ranks(&set, 0..n).unwrap().combined, f);
        // Duplicated regressors make the least-squares design singular.
        assert!(matches!(
            combine_least_squares(&set, 0..n),
            Err(CombineError::Collinear { .. })
        ));
    }

    #[test]
    fn least_squares_reproduces_a_forecast_that_equals_the_actual() {
        let actual: Vec<f64> = (0..12).map(|i| 2.0 + (i as f64 * 0.8).sin()).collect();
        let noise: Vec<f64> = (0..12).map(|i| (i as f64 * 2.13).cos() * 0.9 + 1.0).collect();
        let set = set_of(actual.clone(), vec![("exact", actual.clone()), ("noise", noise)]);
        let n = set.len();
        let result = combine_least_squares(&set, 0..n).unwrap();
        let in_sample = rmse(&actual, &result.combined).unwrap();
        assert!(in_sample < 1e-9, "rmse {in_sample}");
    }

    #[test]
    fn least_squares_never_loses_to_an_individual_in_sample() {
        let actual: Vec<f64> = (0..30).map(|i| (i as f64 * 0.31).sin() + 5.0).collect();
        let f1: Vec<f64> = actual.iter().enumerate().map(|(i, a)| a + 0.4 * ((i * 7) as f64).sin()).collect();
        let f2: Vec<f64> = actual.iter().enumerate().map(|(i, a)| a - 0.3 * ((i * 3) as f64).cos()).collect();
        let set = set_of(actual.clone(), vec![("f1", f1.clone()), ("f2", f2.clone())]);
        let n = set.len();
        let combo = combine_least_squares(&set, 0..n).unwrap();
        let combined_rmse = rmse(&actual, &combo.combined).unwrap();
        let r1 = rmse(&actual, &f1).unwrap();
        let r2 = rmse(&actual, &f2).unwrap();
        assert!(combined_rmse <= r1 + 1e-12 && combined_rmse <= r2 + 1e-12);
    }

    #[test]
    fn inverse_mse_weights_match_formula() {
        // Forecast errors constant over time: MSEs are exactly (1, 3).
        let n = 6;
        let actual = vec![10.0; n];
        let f_a: Vec<f64> = vec![11.0; n]; // mse 1
        let f_b: Vec<f64> = vec![10.0 + 3.0f64.sqrt(); n]; // mse 3
        let set = set_of(actual, vec![("a", f_a), ("b", f_b)]);
        let result = combine_inverse_mse(&set, 0..n).unwrap();
        assert!((result.weights[0] - 0.75).abs() < 1e-12);
        assert!((result.weights[1] - 0.25).abs() < 1e-12);

        // MSEs (1, 1, 2) -> weights (0.4, 0.4, 0.2).
        let actual = vec![0.0; n];
        let one = vec![1.0; n];
        let root2 = vec![2.0f64.sqrt(); n];
        let set = set_of(actual, vec![("a", one.clone()), ("b", one), ("c", root2)]);
        let result = combine_inverse_mse(&set, 0..n).unwrap();
        assert!((result.weights[0] - 0.4).abs() < 1e-12);
        assert!((result.weights[1] - 0.4).abs() < 1e-12);
        assert!((result.weights[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn perfect_forecast_takes_all_inverse_mse_weight() {
        let n = 5;
        let actual = vec![2.0; n];
        let set = set_of(actual.clone(), vec![("perfect", actual), ("off", vec![3.0; n])]);
        let result = combine_inverse_mse(&set, 0..n).unwrap();
        assert!(result.degenerate);
        assert_eq!(result.weights, vec![1.0, 0.0]);
    }

    #[test]
    fn rank_weights_match_formula() {
        let n = 6;
        let actual = vec![0.0; n];
        let set = set_of(actual, vec![("good", vec![1.0; n]), ("bad", vec![2.0; n])]);
        let result = combine_mse_ranks(&set, 0..n).unwrap();
        assert!((result.weights[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((result.weights[1] - 1.0 / 3.0).abs() < 1e-12);

        let set3 = set_of(
            vec![0.0; n],
            vec![("a", vec![1.0; n]), ("b", vec![2.0; n]), ("c", vec![3.0; n])],
        );
        let result = combine_mse_ranks(&set3, 0..n).unwrap();
        assert!((result.weights[0] - 6.0 / 11.0).abs() < 1e-12);
        assert!((result.weights[1] - 3.0 / 11.0).abs() < 1e-12);
        assert!((result.weights[2] - 2.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn tied_mses_rank_by_input_order() {
        let n = 5;
        let set = set_of(
            vec![0.0; n],
            vec![("first", vec![1.0; n]), ("second", vec![-1.0; n])],
        );
        let result = combine_mse_ranks(&set, 0..n).unwrap();
        assert!(result.weights[0] > result.weights[1]);
    }

    #[test]
    fn weights_sum_to_one_for_normalized_schemes() {
        let n = 20;
        let actual: Vec<f64> = (0..n).map(|i| (i as f64 * 0.4).sin() + 3.0).collect();
        let forecasts = vec![
            ("a", actual.iter().map(|v| v + 0.2).collect::<Vec<_>>()),
            ("b", actual.iter().map(|v| v * 1.05).collect::<Vec<_>>()),
            ("c", actual.iter().map(|v| v - 0.15).collect::<Vec<_>>()),
        ];
        let set = set_of(actual, forecasts);
        for scheme in [Scheme::SimpleMean, Scheme::InverseMse, Scheme::MseRanks] {
            let result = combine(scheme, &set, 0..n).unwrap();
            let total: f64 = result.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{scheme:?} sums to {total}");
            assert!(result.weights.iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn report_handles_single_forecast_degenerately() {
        let n = 8;
        let actual: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let set = set_of(actual.clone(), vec![("only", actual.iter().map(|v| v + 1.0).collect())]);
        let report = evaluate_combinations(&set, 0..n, 0..n).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!((report.rows[0].rmse - 1.0).abs() < 1e-12);
        assert!(report.rows[0].best_rmse);
        assert!(report.combinations.is_empty());
    }

    #[test]
    fn report_contains_all_schemes_and_individuals() {
        let n = 24;
        let actual: Vec<f64> = (0..n).map(|i| 10.0 + (i as f64 * 0.5).sin()).collect();
        let f1: Vec<f64> = actual.iter().enumerate().map(|(i, a)| a + 0.3 * ((i * 5) as f64).sin()).collect();
        let f2: Vec<f64> = actual.iter().enumerate().map(|(i, a)| a + 0.4 * ((i * 11) as f64).cos()).collect();
        let set = set_of(actual, vec![("m1", f1), ("m2", f2)]);
        let report = evaluate_combinations(&set, 0..n, 0..n).unwrap();
        assert_eq!(report.rows.len(), 2 + 4);
        assert_eq!(report.skipped.len(), 0);
        assert_eq!(report.rows.iter().filter(|r| r.best_rmse).count(), 1);
        assert_eq!(report.rows.iter().filter(|r| r.best_mape).count(), 1);
        // The least-squares in-sample guarantee shows up in the report too.
        let ls = report.rows.iter().find(|r| r.name == "least_squares").unwrap();
        let best_individual = report
            .rows
            .iter()
            .filter(|r| !r.is_combination)
            .map(|r| r.rmse)
            .fold(f64::INFINITY, f64::min);
        assert!(ls.rmse <= best_individual + 1e-12);
    }
}
