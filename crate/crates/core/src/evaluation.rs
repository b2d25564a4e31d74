//! Forecast accuracy: RMSE, MAPE and the Harvey–Leybourne–Newbold
//! small-sample test of equal predictive accuracy under squared-error loss.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::month::Month;
use crate::Float;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("MAPE undefined: actual value at index {0} is zero")]
    ZeroActual(usize),
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("forecast series {name:?} misaligned: {details}")]
    Misaligned { name: String, details: String },
    #[error("no forecasts provided")]
    NoForecasts,
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

/// Root mean squared error.
pub fn rmse<S: Float>(actual: &[S], predicted: &[S]) -> Result<S, EvaluationError> {
    if actual.len() != predicted.len() {
        return Err(EvaluationError::LengthMismatch { left: actual.len(), right: predicted.len() });
    }
    if actual.is_empty() {
        return Err(EvaluationError::Empty);
    }
    let sq: S = actual
        .iter()
        .zip(predicted.iter())
        .map(|(a, p)| (*a - *p) * (*a - *p))
        .sum();
    Ok((sq / S::from_count(actual.len())).sqrt())
}

/// Mean absolute percentage error, in percent. Every actual must be nonzero.
pub fn mape<S: Float>(actual: &[S], predicted: &[S]) -> Result<S, EvaluationError> {
    if actual.len() != predicted.len() {
        return Err(EvaluationError::LengthMismatch { left: actual.len(), right: predicted.len() });
    }
    if actual.is_empty() {
        return Err(EvaluationError::Empty);
    }
    let mut acc = S::zero();
    for (i, (a, p)) in actual.iter().zip(predicted.iter()).enumerate() {
        if *a == S::zero() {
            return Err(EvaluationError::ZeroActual(i));
        }
        acc += ((*a - *p) / *a).abs();
    }
    Ok(acc / S::from_count(actual.len()) * S::cast(100.0))
}

/// Result of the corrected Diebold–Mariano (HLN) test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlnResult<S> {
    /// Small-sample corrected DM statistic.
    pub statistic: S,
    /// Two-sided p-value from a Student-t with `n - 1` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
    pub h: usize,
    /// Mean of the loss differential `e1² - e2²`.
    pub mean_loss_diff: S,
    /// Set when the loss differential has zero variance (identical losses);
    /// the statistic is then 0 and the p-value 1 by convention.
    pub degenerate: bool,
}

/// Harvey–Leybourne–Newbold test of equal predictive accuracy.
///
/// The loss differential is `d_t = e_a² - e_b²`; its long-run variance uses
/// rectangularly truncated autocovariances up to `h - 1` lags (for one-step
/// forecasts this is the plain sample variance). The DM statistic is scaled
/// by the small-sample factor `sqrt((n + 1 - 2h + h(h-1)/n) / n)` and
/// referred to a Student-t with `n - 1` degrees of freedom.
pub fn hln_test<S: Float>(
    errors_a: &[S],
    errors_b: &[S],
    horizon: usize,
) -> Result<HlnResult<S>, EvaluationError> {
    if errors_a.len() != errors_b.len() {
        return Err(EvaluationError::LengthMismatch {
            left: errors_a.len(),
            right: errors_b.len(),
        });
    }
    let n = errors_a.len();
    if n < 10 {
        return Err(EvaluationError::TooShort { needed: 10, got: n });
    }
    if horizon == 0 {
        return Err(EvaluationError::ZeroHorizon);
    }

    let d: Vec<S> = errors_a
        .iter()
        .zip(errors_b.iter())
        .map(|(a, b)| *a * *a - *b * *b)
        .collect();
    let n_s = S::from_count(n);
    let d_bar = d.iter().copied().sum::<S>() / n_s;

    // Autocovariances of d at lags 0..h-1, 1/n normalization.
    let mut long_run_var = S::zero();
    for lag in 0..horizon.min(n) {
        let mut gamma = S::zero();
        for t in lag..n {
            gamma += (d[t] - d_bar) * (d[t - lag] - d_bar);
        }
        gamma = gamma / n_s;
        long_run_var += if lag == 0 { gamma } else { gamma + gamma };
    }

    if long_run_var <= S::zero() || long_run_var.as_f64() < 1e-300 {
        return Ok(HlnResult {
            statistic: S::zero(),
            p_value: 1.0,
            n,
            h: horizon,
            mean_loss_diff: d_bar,
            degenerate: true,
        });
    }

    let dm = d_bar / (long_run_var / n_s).sqrt();
    let h_s = horizon as f64;
    let n_f = n as f64;
    let correction = ((n_f + 1.0 - 2.0 * h_s + h_s * (h_s - 1.0) / n_f) / n_f).sqrt();
    let statistic = dm * S::cast(correction);

    let t_dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    let p_value = 2.0 * (1.0 - t_dist.cdf(statistic.as_f64().abs()));

    Ok(HlnResult {
        statistic,
        p_value,
        n,
        h: horizon,
        mean_loss_diff: d_bar,
        degenerate: false,
    })
}

/// Aligned actuals plus one or more named forecast series over the same dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet<S> {
    dates: Vec<Month>,
    actual: Vec<S>,
    forecasts: Vec<(String, Vec<S>)>,
}

impl<S: Float> ForecastSet<S> {
    pub fn new(
        dates: Vec<Month>,
        actual: Vec<S>,
        forecasts: Vec<(String, Vec<S>)>,
    ) -> Result<Self, EvaluationError> {
        if forecasts.is_empty() {
            return Err(EvaluationError::NoForecasts);
        }
        if dates.len() != actual.len() {
            return Err(EvaluationError::LengthMismatch {
                left: dates.len(),
                right: actual.len(),
            });
        }
        if actual.is_empty() {
            return Err(EvaluationError::Empty);
        }
        if !actual.iter().all(|v| v.is_finite()) {
            return Err(EvaluationError::NonFinite("actual".to_string()));
        }
        for (name, series) in &forecasts {
            if series.len() != actual.len() {
                return Err(EvaluationError::Misaligned {
                    name: name.clone(),
                    details: format!("{} values against {} dates", series.len(), dates.len()),
                });
            }
            if !series.iter().all(|v| v.is_finite()) {
                return Err(EvaluationError::NonFinite(name.clone()));
            }
        }
        Ok(Self { dates, actual, forecasts })
    }

    pub fn dates(&self) -> &[Month] {
        &self.dates
    }

    pub fn actual(&self) -> &[S] {
        &self.actual
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    pub fn forecast_names(&self) -> impl Iterator<Item = &str> {
        self.forecasts.iter().map(|(name, _)| name.as_str())
    }

    pub fn forecasts(&self) -> &[(String, Vec<S>)] {
        &self.forecasts
    }

    pub fn forecast(&self, name: &str) -> Option<&[S]> {
        self.forecasts
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, values)| values.as_slice())
    }

    /// Forecast errors `actual - forecast` for one series.
    pub fn errors(&self, name: &str) -> Option<Vec<S>> {
        self.forecast(name).map(|f| {
            self.actual.iter().zip(f.iter()).map(|(a, p)| *a - *p).collect()
        })
    }

    /// Pairwise HLN tests over all forecast pairs `(i, j)` with `i < j`.
    pub fn hln_matrix(
        &self,
        horizon: usize,
    ) -> Result<Vec<(String, String, HlnResult<S>)>, EvaluationError> {
        let mut out = Vec::new();
        for i in 0..self.forecasts.len() {
            for j in i + 1..self.forecasts.len() {
                let (name_a, fa) = &self.forecasts[i];
                let (name_b, fb) = &self.forecasts[j];
                let ea: Vec<S> =
                    self.actual.iter().zip(fa.iter()).map(|(a, p)| *a - *p).collect();
                let eb: Vec<S> =
                    self.actual.iter().zip(fb.iter()).map(|(a, p)| *a - *p).collect();
                out.push((name_a.clone(), name_b.clone(), hln_test(&ea, &eb, horizon)?));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};

    #[test]
    fn perfect_forecast_scores_zero() {
        let a = [1.0f64, 2.0, 3.0];
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(mape(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn rmse_matches_direct_formula() {
        let value = rmse(&[0.0f64, 0.0], &[3.0, 4.0]).unwrap();
        assert!((value - 12.5f64.sqrt()).abs() < 1e-12); // 3.5355339059327378
    }

    #[test]
    fn mape_matches_direct_formula() {
        let value = mape(&[100.0f64, 200.0], &[110.0, 180.0]).unwrap();
        assert!((value - 10.0).abs() < 1e-12);
    }

    #[test]
    fn mape_requires_nonzero_actuals() {
        assert!(matches!(
            mape(&[1.0f64, 0.0], &[1.0, 1.0]),
            Err(EvaluationError::ZeroActual(1))
        ));
    }

    #[test]
    fn rmse_of_constant_offset_is_the_offset() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 2.5).collect();
        assert!((rmse(&x, &shifted).unwrap() - 2.5).abs() < 1e-12);
        let down: Vec<f64> = x.iter().map(|v| v - 1.75).collect();
        assert!((rmse(&x, &down).unwrap() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn mape_is_directional_in_its_denominator() {
        let a = [100.0f64];
        let p = [50.0f64];
        // |100-50|/100 = 50% but |50-100|/50 = 100%.
        assert!((mape(&a, &p).unwrap() - 50.0).abs() < 1e-12);
        assert!((mape(&p, &a).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn identical_errors_are_degenerate_with_p_one() {
        let e: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
        let result = hln_test(&e, &e, 1).unwrap();
        assert!(result.degenerate);
        assert_eq!(result.statistic, 0.0);
        assert_eq!(result.p_value, 1.0);
    }

    #[test]
    fn hln_is_antisymmetric_and_scale_invariant() {
        let mut r = rng::stream(3, Stream::Simulation, 5);
        let e1: Vec<f64> = (0..50).map(|_| rng::standard_normal::<f64>(&mut r)).collect();
        let e2: Vec<f64> = (0..50).map(|_| 1.3 * rng::standard_normal::<f64>(&mut r)).collect();

        let ab = hln_test(&e1, &e2, 1).unwrap();
        let ba = hln_test(&e2, &e1, 1).unwrap();
        assert!((ab.statistic + ba.statistic).abs() < 1e-12);
        assert!((ab.p_value - ba.p_value).abs() < 1e-12);

        let e1s: Vec<f64> = e1.iter().map(|v| v * 7.0).collect();
        let e2s: Vec<f64> = e2.iter().map(|v| v * 7.0).collect();
        let scaled = hln_test(&e1s, &e2s, 1).unwrap();
        assert!((ab.statistic - scaled.statistic).abs() < 1e-10);
        assert!((ab.p_value - scaled.p_value).abs() < 1e-10);
    }

    #[test]
    fn hln_rejects_short_or_mismatched_input() {
        let short = [1.0f64; 5];
        assert!(matches!(
            hln_test(&short, &short, 1),
            Err(EvaluationError::TooShort { .. })
        ));
        let a = [1.0f64; 12];
        let b = [1.0f64; 11];
        assert!(hln_test(&a, &b, 1).is_err());
        assert!(hln_test(&a, &a, 0).is_err());
    }

    #[test]
    fn forecast_set_validates_alignment() {
        let dates: Vec<Month> = {
            let mut out = Vec::new();
            let mut m: Month = "2010-01".parse().unwrap();
            for _ in 0..5 {
                out.push(m);
                m = m.succ();
            }
            out
        };
        let actual = vec![1.0f64, 2.0, 3.0, 4.0, 5.0];
        let good = ForecastSet::new(
            dates.clone(),
            actual.clone(),
            vec![("m1".into(), vec![1.0; 5]), ("m2".into(), vec![2.0; 5])],
        )
        .unwrap();
        assert_eq!(good.forecast_names().collect::<Vec<_>>(), vec!["m1", "m2"]);

        assert!(ForecastSet::new(dates.clone(), actual.clone(), vec![]).is_err());
        assert!(ForecastSet::new(
            dates,
            actual,
            vec![("short".into(), vec![1.0; 3])],
        )
        .is_err());
    }
}
