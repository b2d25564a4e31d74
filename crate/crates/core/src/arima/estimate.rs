//! ARMA estimation by conditional least squares.
//!
//! The conditional sum of squares (pre-sample innovations zero, conditioning
//! on the first `p` observations) is minimized by BFGS with numerical
//! gradients, started from Hannan–Rissanen values. AR and MA coefficients are
//! optimized through the reflection-coefficient transform (tanh of
//! unconstrained values expanded by the Levinson recursion), which keeps
//! every iterate strictly stationary and invertible.

use serde::{Deserialize, Serialize};

use crate::linalg::ols;
use crate::Float;

use super::{ArimaError, ArmaModel, ArmaSpec};

/// Optimizer limits, exposed because long near-unit-root series can need
/// more iterations than the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the infinity norm of the gradient of the
    /// mean squared innovation.
    pub gradient_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 500, gradient_tolerance: 1e-8 }
    }
}

/// Expand reflection coefficients (each in (-1, 1)) into the coefficients of
/// a stationary AR polynomial via the Levinson recursion.
pub fn reflection_to_poly<S: Float>(kappa: &[S]) -> Vec<S> {
    let mut coeffs: Vec<S> = Vec::with_capacity(kappa.len());
    for (k, kap) in kappa.iter().enumerate() {
        let prev = coeffs.clone();
        coeffs.clear();
        for j in 0..k {
            coeffs.push(prev[j] - *kap * prev[k - 1 - j]);
        }
        coeffs.push(*kap);
    }
    coeffs
}

/// Invert [`reflection_to_poly`] (the step-down recursion). Returns `None`
/// when the polynomial is not strictly stationary.
pub fn poly_to_reflection<S: Float>(coeffs: &[S]) -> Option<Vec<S>> {
    let p = coeffs.len();
    let mut kappa = vec![S::zero(); p];
    let mut cur = coeffs.to_vec();
    for k in (0..p).rev() {
        let kap = cur[k];
        if kap.abs() >= S::one() {
            return None;
        }
        kappa[k] = kap;
        if k == 0 {
            break;
        }
        let denom = S::one() - kap * kap;
        let mut prev = vec![S::zero(); k];
        for (j, slot) in prev.iter_mut().enumerate() {
            *slot = (cur[j] + kap * cur[k - 1 - j]) / denom;
        }
        cur = prev;
    }
    Some(kappa)
}

fn unconstrained_to_coeffs<S: Float>(u: &[S]) -> Vec<S> {
    let kappa: Vec<S> = u.iter().map(|v| v.tanh()).collect();
    reflection_to_poly(&kappa)
}

fn coeffs_to_unconstrained<S: Float>(coeffs: &[S]) -> Option<Vec<S>> {
    let kappa = poly_to_reflection(coeffs)?;
    // atanh, clamped away from the saturation edge.
    let cap = S::cast(0.999_999);
    Some(
        kappa
            .iter()
            .map(|k| {
                let k = k.min(cap).max(-cap);
                ((S::one() + k) / (S::one() - k)).ln() / S::cast(2.0)
            })
            .collect(),
    )
}

/// Innovations of the conditional filter, starting from zero pre-sample
/// values; entries before index `p` stay zero.
pub(crate) fn innovations<S: Float>(y: &[S], mean: S, ar: &[S], ma: &[S]) -> Vec<S> {
    let n = y.len();
    let p = ar.len();
    let mut e = vec![S::zero(); n];
    for t in p..n {
        let mut eps = y[t] - mean;
        for (i, phi) in ar.iter().enumerate() {
            eps -= *phi * (y[t - 1 - i] - mean);
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                eps += *theta * e[t - 1 - j];
            }
        }
        e[t] = eps;
    }
    e
}

fn css<S: Float>(y: &[S], mean: S, ar: &[S], ma: &[S]) -> S {
    let p = ar.len();
    innovations(y, mean, ar, ma)[p..].iter().map(|e| *e * *e).sum()
}

/// Hannan–Rissanen starting values: a long autoregression supplies proxy
/// innovations, then one OLS of the series on its own lags and the proxy
/// innovation lags gives initial AR/MA coefficients.
fn hannan_rissanen<S: Float>(y: &[S], p: usize, q: usize) -> (Vec<S>, Vec<S>) {
    let n = y.len();
    let mean = y.iter().copied().sum::<S>() / S::from_count(n);
    let centered: Vec<S> = y.iter().map(|v| *v - mean).collect();

    if p == 0 && q == 0 {
        return (vec![], vec![]);
    }

    let long = ((12.0 * (n as f64 / 100.0).powf(0.25)) as usize)
        .max(p + q)
        .min(n / 4);

    // Long AR via Durbin-Levinson on the ACF. A failure anywhere falls back
    // to zero starting values, which CSS can still improve from.
    let fallback = (vec![S::zero(); p], vec![S::zero(); q]);
    let rho = match super::acf(&centered, long) {
        Ok(r) => r,
        Err(_) => return fallback,
    };
    let mut phi_long: Vec<S> = Vec::new();
    for k in 1..=long {
        let mut num = rho[k];
        let mut den = S::one();
        for (j, pj) in phi_long.iter().enumerate() {
            num -= *pj * rho[k - 1 - j];
            den -= *pj * rho[j + 1];
        }
        if den.abs() < S::cast(1e-12) {
            return fallback;
        }
        let kappa = num / den;
        let prev = phi_long.clone();
        phi_long.clear();
        for j in 0..k - 1 {
            phi_long.push(prev[j] - kappa * prev[k - 2 - j]);
        }
        phi_long.push(kappa);
    }

    let mut proxy = vec![S::zero(); n];
    for t in long..n {
        let mut e = centered[t];
        for (i, phi) in phi_long.iter().enumerate() {
            e -= *phi * centered[t - 1 - i];
        }
        proxy[t] = e;
    }

    // Regression of y_t on its own p lags and q innovation lags, over rows
    // where everything is observed.
    let start = long + q.max(p);
    if n <= start + p + q + 2 {
        return fallback;
    }
    let rows = n - start;
    let cols = p + q;
    let mut design = Vec::with_capacity(rows * cols);
    let mut target = Vec::with_capacity(rows);
    for t in start..n {
        for i in 1..=p {
            design.push(centered[t - i]);
        }
        for j in 1..=q {
            design.push(proxy[t - j]);
        }
        target.push(centered[t]);
    }
    match ols(&design, rows, cols, &target) {
        Ok(fit) => {
            let ar = fit.coefficients[..p].to_vec();
            // The model writes the MA side as -theta e_{t-j}.
            let ma = fit.coefficients[p..].iter().map(|c| -*c).collect();
            (ar, ma)
        }
        Err(_) => fallback,
    }
}

/// Map possibly-nonstationary starting coefficients into the unconstrained
/// space, shrinking toward zero until the step-down succeeds.
fn to_unconstrained_shrinking<S: Float>(coeffs: &[S]) -> Vec<S> {
    let mut scale = S::one();
    for _ in 0..32 {
        let scaled: Vec<S> = coeffs.iter().map(|c| *c * scale).collect();
        if let Some(u) = coeffs_to_unconstrained(&scaled) {
            return u;
        }
        scale = scale * S::cast(0.8);
    }
    vec![S::zero(); coeffs.len()]
}

struct Objective<'a, S> {
    y: &'a [S],
    p: usize,
    q: usize,
    n_used: usize,
}

impl<S: Float> Objective<'_, S> {
    /// Mean squared innovation at the unconstrained parameter vector
    /// `[mean, u_ar.., u_ma..]`.
    fn eval(&self, u: &[S]) -> S {
        let mean = u[0];
        let ar = unconstrained_to_coeffs(&u[1..1 + self.p]);
        let ma = unconstrained_to_coeffs(&u[1 + self.p..1 + self.p + self.q]);
        css(self.y, mean, &ar, &ma) / S::from_count(self.n_used)
    }

    fn gradient(&self, u: &[S], scratch: &mut Vec<S>) -> Vec<S> {
        let k = u.len();
        let mut g = vec![S::zero(); k];
        scratch.clear();
        scratch.extend_from_slice(u);
        for i in 0..k {
            let h = S::cast(1e-6) * (S::one() + u[i].abs());
            scratch[i] = u[i] + h;
            let up = self.eval(scratch);
            scratch[i] = u[i] - h;
            let down = self.eval(scratch);
            scratch[i] = u[i];
            g[i] = (up - down) / (h + h);
        }
        g
    }
}

fn bfgs<S: Float>(
    objective: &Objective<'_, S>,
    mut u: Vec<S>,
    opts: &FitOptions,
) -> Result<Vec<S>, ArimaError> {
    let k = u.len();
    let mut h_inv: Vec<S> = {
        let mut m = vec![S::zero(); k * k];
        for i in 0..k {
            m[i * k + i] = S::one();
        }
        m
    };
    let mut scratch = Vec::with_capacity(k);
    let mut f = objective.eval(&u);
    if !f.is_finite() {
        return Err(ArimaError::NonFinite("objective at starting values"));
    }
    let mut g = objective.gradient(&u, &mut scratch);
    let tol = S::cast(opts.gradient_tolerance);

    for iteration in 0..opts.max_iterations {
        let g_norm = g.iter().fold(S::zero(), |acc, v| acc.max(v.abs()));
        if g_norm < tol * (S::one() + f.abs()) {
            return Ok(u);
        }

        // Search direction d = -H g, reset to steepest descent if not one.
        let mut d = vec![S::zero(); k];
        for i in 0..k {
            let mut acc = S::zero();
            for j in 0..k {
                acc += h_inv[i * k + j] * g[j];
            }
            d[i] = -acc;
        }
        let mut slope: S = d.iter().zip(g.iter()).map(|(a, b)| *a * *b).sum();
        if slope >= S::zero() {
            for i in 0..k {
                for j in 0..k {
                    h_inv[i * k + j] = if i == j { S::one() } else { S::zero() };
                }
            }
            for i in 0..k {
                d[i] = -g[i];
            }
            slope = -g.iter().map(|v| *v * *v).sum::<S>();
        }

        // Backtracking Armijo line search.
        let mut step = S::one();
        let c1 = S::cast(1e-4);
        let mut improved = false;
        let mut u_new = u.clone();
        let mut f_new = f;
        for _ in 0..48 {
            for i in 0..k {
                u_new[i] = u[i] + step * d[i];
            }
            let candidate = objective.eval(&u_new);
            if candidate.is_finite() && candidate <= f + c1 * step * slope {
                f_new = candidate;
                improved = true;
                break;
            }
            step = step * S::cast(0.5);
        }
        if !improved {
            // No direction of decrease within machine resolution: accept the
            // current point if the gradient is at least moderately small.
            if g_norm.as_f64() < 1e-3 * (1.0 + f.as_f64()) {
                return Ok(u);
            }
            return Err(ArimaError::NonConvergence {
                iterations: iteration,
                gradient_norm: g_norm.as_f64(),
            });
        }

        let g_new = objective.gradient(&u_new, &mut scratch);
        // BFGS inverse-Hessian update.
        let mut s = vec![S::zero(); k];
        let mut yv = vec![S::zero(); k];
        for i in 0..k {
            s[i] = u_new[i] - u[i];
            yv[i] = g_new[i] - g[i];
        }
        let sy: S = s.iter().zip(yv.iter()).map(|(a, b)| *a * *b).sum();
        if sy > S::cast(1e-12) {
            let rho = S::one() / sy;
            // H <- (I - rho s y') H (I - rho y s') + rho s s'
            let mut hy = vec![S::zero(); k];
            for i in 0..k {
                let mut acc = S::zero();
                for j in 0..k {
                    acc += h_inv[i * k + j] * yv[j];
                }
                hy[i] = acc;
            }
            let yhy: S = yv.iter().zip(hy.iter()).map(|(a, b)| *a * *b).sum();
            for i in 0..k {
                for j in 0..k {
                    let upd = (s[i] * hy[j] + hy[i] * s[j]) * rho
                        - s[i] * s[j] * rho * rho * yhy
                        - s[i] * s[j] * rho;
                    h_inv[i * k + j] = h_inv[i * k + j] - upd;
                }
            }
        }
        u = u_new;
        f = f_new;
        g = g_new;
    }

    let g_norm = g.iter().fold(S::zero(), |acc, v| acc.max(v.abs()));
    if g_norm < S::cast(1e-4) * (S::one() + f.abs()) {
        // Near-flat region after the iteration budget; good enough for order
        // scans, where candidates are compared on the same footing.
        return Ok(u);
    }
    Err(ArimaError::NonConvergence {
        iterations: opts.max_iterations,
        gradient_norm: g_norm.as_f64(),
    })
}

/// Estimate an ARMA(p,q) with intercept on `series` by conditional least
/// squares. `spec.d` is carried through untouched; differencing happens in
/// the forecasting layer.
pub fn fit_arma<S: Float>(
    series: &[S],
    spec: ArmaSpec,
    opts: &FitOptions,
) -> Result<ArmaModel<S>, ArimaError> {
    let n = series.len();
    let p = spec.p;
    let q = spec.q;
    let needed = (p + q + 1) * 4 + p;
    if n < needed.max(8) {
        return Err(ArimaError::TooShort { got: n, needed: needed.max(8) });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::NonFinite("input series"));
    }

    let n_used = n - p;
    let mean0 = series.iter().copied().sum::<S>() / S::from_count(n);

    if p == 0 && q == 0 {
        // Pure mean model, closed form.
        let residuals = innovations(series, mean0, &[], &[]);
        let css_val: S = residuals.iter().map(|e| *e * *e).sum();
        return Ok(ArmaModel {
            spec,
            mean: mean0,
            ar: vec![],
            ma: vec![],
            sigma2: css_val / S::from_count(n_used),
            residuals,
            loglik_proxy: css_val,
            n_used,
        });
    }

    let (ar0, ma0) = hannan_rissanen(series, p, q);
    let mut u0 = Vec::with_capacity(1 + p + q);
    u0.push(mean0);
    u0.extend(to_unconstrained_shrinking(&ar0));
    u0.extend(to_unconstrained_shrinking(&ma0));

    let objective = Objective { y: series, p, q, n_used };
    let u = bfgs(&objective, u0, opts)?;

    let mean = u[0];
    let ar = unconstrained_to_coeffs(&u[1..1 + p]);
    let ma = unconstrained_to_coeffs(&u[1 + p..1 + p + q]);
    // The transform keeps iterates inside the stationary and invertible
    // regions; verify anyway so a violated invariant can never escape.
    if poly_to_reflection(&ar).is_none() {
        return Err(ArimaError::UnstableRoots("stationarity"));
    }
    if poly_to_reflection(&ma).is_none() {
        return Err(ArimaError::UnstableRoots("invertibility"));
    }

    let residuals = innovations(series, mean, &ar, &ma);
    let css_val: S = residuals[p..].iter().map(|e| *e * *e).sum();
    Ok(ArmaModel {
        spec,
        mean,
        ar,
        ma,
        sigma2: css_val / S::from_count(n_used),
        residuals,
        loglik_proxy: css_val,
        n_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::sim;
    use crate::rng::{stream, Stream};

    #[test]
    fn reflection_round_trip() {
        let kappa = vec![0.7f64, -0.4, 0.2];
        let coeffs = reflection_to_poly(&kappa);
        let back = poly_to_reflection(&coeffs).unwrap();
        for (a, b) in kappa.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // A unit root is rejected.
        assert!(poly_to_reflection(&[1.0f64]).is_none());
        // The explosive AR(1) too.
        assert!(poly_to_reflection(&[1.05f64]).is_none());
        // A comfortably stationary AR(2).
        assert!(poly_to_reflection(&[0.5f64, 0.3]).is_some());
    }

    #[test]
    fn white_noise_with_mean_reduces_to_sample_moments() {
        let mut r = stream(3, Stream::Simulation, 20);
        let y = sim::arma::<f64>(4000, 5.0, &[], &[], 1.0, &mut r);
        let model = fit_arma(&y, ArmaSpec::new(0, 0, 0), &FitOptions::default()).unwrap();
        assert!((model.mean - 5.0).abs() < 0.1, "mean {}", model.mean);
        assert!((model.sigma2 - 1.0).abs() < 0.1, "sigma2 {}", model.sigma2);
        assert_eq!(model.n_used, 4000);
    }

    #[test]
    fn ar1_coefficient_is_recovered() {
        let mut r = stream(3, Stream::Simulation, 21);
        let y = sim::arma::<f64>(2000, 0.0, &[0.7], &[], 1.0, &mut r);
        let model = fit_arma(&y, ArmaSpec::new(1, 0, 0), &FitOptions::default()).unwrap();
        assert!(
            (0.6..=0.8).contains(&model.ar[0]),
            "phi estimate {} outside [0.6, 0.8]",
            model.ar[0]
        );
    }

    #[test]
    fn ma1_coefficient_is_recovered() {
        let mut r = stream(3, Stream::Simulation, 22);
        let y = sim::arma::<f64>(2000, 0.0, &[], &[0.4], 1.0, &mut r);
        let model = fit_arma(&y, ArmaSpec::new(0, 0, 1), &FitOptions::default()).unwrap();
        assert!(
            (0.3..=0.5).contains(&model.ma[0]),
            "theta estimate {} outside [0.3, 0.5]",
            model.ma[0]
        );
    }

    #[test]
    fn estimated_models_always_pass_the_root_checks() {
        let mut r = stream(3, Stream::Simulation, 23);
        for rep in 0..5 {
            let y = sim::arma::<f64>(
                600,
                1.0,
                &[0.5, -0.2],
                &[0.3],
                0.5 + 0.1 * rep as f64,
                &mut r,
            );
            let model = fit_arma(&y, ArmaSpec::new(2, 0, 1), &FitOptions::default()).unwrap();
            assert!(poly_to_reflection(&model.ar).is_some());
            assert!(poly_to_reflection(&model.ma).is_some());
        }
    }

    #[test]
    fn residual_count_matches_sample() {
        let mut r = stream(3, Stream::Simulation, 24);
        let y = sim::arma::<f64>(300, 0.0, &[0.4], &[], 1.0, &mut r);
        let model = fit_arma(&y, ArmaSpec::new(1, 0, 0), &FitOptions::default()).unwrap();
        assert_eq!(model.residuals.len(), 300);
        assert_eq!(model.n_used, 299);
        assert_eq!(model.residuals[0], 0.0); // pre-sample convention
    }

    #[test]
    fn short_series_is_rejected() {
        let y = vec![1.0f64, 2.0, 3.0];
        assert!(matches!(
            fit_arma(&y, ArmaSpec::new(1, 0, 1), &FitOptions::default()),
            Err(ArimaError::TooShort { .. })
        ));
    }
}
