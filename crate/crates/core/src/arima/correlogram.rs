//! Sample autocorrelations and partial autocorrelations.

use crate::Float;

use super::ArimaError;

/// Sample ACF with `1/n` normalization; index 0 is always 1.
pub fn acf<S: Float>(series: &[S], max_lag: usize) -> Result<Vec<S>, ArimaError> {
    let n = series.len();
    if n < 2 {
        return Err(ArimaError::TooShort { got: n, needed: 2 });
    }
    if max_lag >= n / 2 {
        return Err(ArimaError::LagTooLarge { max_lag, n });
    }
    let n_s = S::from_count(n);
    let mean = series.iter().copied().sum::<S>() / n_s;
    let centered: Vec<S> = series.iter().map(|v| *v - mean).collect();
    let gamma0 = centered.iter().map(|v| *v * *v).sum::<S>() / n_s;
    if gamma0 <= S::zero() {
        return Err(ArimaError::ConstantSeries);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(S::one());
    for k in 1..=max_lag {
        let mut acc = S::zero();
        for t in k..n {
            acc += centered[t] * centered[t - k];
        }
        out.push(acc / n_s / gamma0);
    }
    Ok(out)
}

/// Sample PACF via the Durbin–Levinson recursion on the ACF; index 0 is 1.
pub fn pacf<S: Float>(series: &[S], max_lag: usize) -> Result<Vec<S>, ArimaError> {
    let rho = acf(series, max_lag)?;
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(S::one());
    // phi[k][j] coefficients of the order-k predictor.
    let mut phi_prev: Vec<S> = Vec::new();
    for k in 1..=max_lag {
        let mut num = rho[k];
        let mut den = S::one();
        for (j, pj) in phi_prev.iter().enumerate() {
            num -= *pj * rho[k - 1 - j];
            den -= *pj * rho[j + 1];
        }
        let kappa = if den.abs() < S::cast(1e-300) { S::zero() } else { num / den };
        let mut phi = Vec::with_capacity(k);
        for j in 0..k - 1 {
            phi.push(phi_prev[j] - kappa * phi_prev[k - 2 - j]);
        }
        phi.push(kappa);
        out.push(kappa);
        phi_prev = phi;
    }
    Ok(out)
}
