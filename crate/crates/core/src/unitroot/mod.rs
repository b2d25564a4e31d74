//! Breakpoint Dickey–Fuller unit-root testing.
//!
//! The regression is the generalized Dickey–Fuller equation in levels — an
//! intercept, optionally a linear trend, break dummies at a candidate date
//! `T_b`, the lagged level and augmentation lags of the first difference —
//! estimated in the equivalent difference form for conditioning. Every
//! admissible date in the trimmed sample is tried as a break and the date
//! minimizing the t-statistic on the lagged level is selected. P-values come
//! from Monte-Carlo simulation of the identical search under a driftless
//! random-walk null (`null` submodule).

mod null;

pub use null::{load_or_simulate, simulate_null, NullDistribution};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, ols};
use crate::Float;

#[derive(Debug, Error)]
pub enum UnitRootError {
    #[error("series too short for breakpoint testing: {got} observations, need {needed}")]
    TooShort { got: usize, needed: usize },
    #[error("trimming must lie in [0, 0.5), got {0}")]
    BadTrimming(f64),
    #[error("break date {t_b} leaves a singular or undersized regression")]
    DegenerateBreak { t_b: usize },
    #[error("no admissible break date produced a valid regression")]
    NoValidBreak,
    #[error("insufficient observations after lags: {rows} rows for {cols} regressors")]
    NotEnoughRows { rows: usize, cols: usize },
    #[error("need at least 100 replications, got {0}")]
    TooFewReps(usize),
    #[error("null-distribution cache io: {0}")]
    CacheIo(#[from] std::io::Error),
    #[error("null-distribution cache is corrupt: {0}")]
    CacheCorrupt(String),
}

/// Restriction patterns on the deterministic terms of the test equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakVariant {
    /// Non-trending data, intercept break: intercept, `DU`, one-time dummy.
    InterceptOnly,
    /// Trending data, intercept break: intercept, trend, `DU`, one-time dummy.
    InterceptBreak,
    /// Trending data, trend break: intercept, trend, `DT`.
    TrendBreak,
    /// No restriction: intercept, trend, `DU`, `DT`, one-time dummy.
    BothBreaks,
}

impl BreakVariant {
    pub fn name(self) -> &'static str {
        match self {
            BreakVariant::InterceptOnly => "intercept_only",
            BreakVariant::InterceptBreak => "intercept_break",
            BreakVariant::TrendBreak => "trend_break",
            BreakVariant::BothBreaks => "both_breaks",
        }
    }

    fn has_trend(self) -> bool {
        matches!(self, BreakVariant::InterceptBreak | BreakVariant::TrendBreak | BreakVariant::BothBreaks)
    }

    fn has_du(self) -> bool {
        matches!(self, BreakVariant::InterceptOnly | BreakVariant::InterceptBreak | BreakVariant::BothBreaks)
    }

    fn has_dt(self) -> bool {
        matches!(self, BreakVariant::TrendBreak | BreakVariant::BothBreaks)
    }

    fn has_one_time(self) -> bool {
        matches!(self, BreakVariant::InterceptOnly | BreakVariant::InterceptBreak | BreakVariant::BothBreaks)
    }

    /// Count of deterministic regressors (before the lagged level).
    fn det_count(self) -> usize {
        1 + usize::from(self.has_trend())
            + usize::from(self.has_du())
            + usize::from(self.has_dt())
            + usize::from(self.has_one_time())
    }
}

impl std::str::FromStr for BreakVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intercept_only" | "intercept-only" => Ok(BreakVariant::InterceptOnly),
            "intercept_break" | "intercept-break" => Ok(BreakVariant::InterceptBreak),
            "trend_break" | "trend-break" => Ok(BreakVariant::TrendBreak),
            "both_breaks" | "both-breaks" | "both" => Ok(BreakVariant::BothBreaks),
            other => Err(format!(
                "unknown break variant {other:?} (intercept_only, intercept_break, trend_break, both_breaks)"
            )),
        }
    }
}

/// Augmentation-lag selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagRule {
    /// Minimize the Schwarz criterion over 0..=lag_max on a common sample.
    Sic,
    /// Largest lag whose last coefficient is significant at 10% (|t| >= 1.645),
    /// scanning downward.
    TSig,
}

/// Test configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakSpec {
    pub variant: BreakVariant,
    /// Fraction of the sample excluded from the break search at each end.
    pub trimming: f64,
    /// Maximum augmentation lag; `None` uses the `12 (n/100)^{1/4}` rule.
    pub lag_max: Option<usize>,
    pub lag_rule: LagRule,
}

impl Default for BreakSpec {
    fn default() -> Self {
        Self {
            variant: BreakVariant::BothBreaks,
            trimming: 0.15,
            lag_max: None,
            lag_rule: LagRule::Sic,
        }
    }
}

impl BreakSpec {
    pub fn validate(&self) -> Result<(), UnitRootError> {
        if !(0.0..0.5).contains(&self.trimming) {
            return Err(UnitRootError::BadTrimming(self.trimming));
        }
        Ok(())
    }

    pub fn effective_lag_max(&self, n: usize) -> usize {
        self.lag_max
            .unwrap_or_else(|| (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize)
    }
}

/// t-statistic profile entry at one candidate break date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint<S> {
    /// Break date as a 1-based time index into the series.
    pub time: usize,
    pub t_stat: S,
    pub lag: usize,
}

/// Outcome of the min-t break search.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakAdfResult<S> {
    /// The minimized Dickey–Fuller t-statistic on the lagged level.
    pub min_t: S,
    /// 0-based index of the selected break observation.
    pub break_index: usize,
    /// Levels-form coefficient on the lagged price at the selected break.
    pub alpha_hat: S,
    pub chosen_lag: usize,
    /// Monte-Carlo p-value; attach with [`BreakAdfResult::with_p_value`].
    pub p_value: Option<f64>,
    pub per_date_t: Vec<ProfilePoint<S>>,
}

impl<S: Float> BreakAdfResult<S> {
    /// Attach the p-value from a matching simulated null distribution.
    pub fn with_p_value(mut self, null: &NullDistribution) -> Self {
        self.p_value = Some(null.p_value(self.min_t.as_f64()));
        self
    }
}

/// Indicator regressors for a break at the 1-based date `t_b` over a sample
/// of length `n`: the intercept-break step `DU`, the rebased trend `DT` and
/// the one-time dummy `D`.
pub fn break_dummies<S: Float>(n: usize, t_b: usize) -> (Vec<S>, Vec<S>, Vec<S>) {
    let mut du = vec![S::zero(); n];
    let mut dt = vec![S::zero(); n];
    let mut d = vec![S::zero(); n];
    for idx in 0..n {
        let time = idx + 1;
        if time >= t_b {
            du[idx] = S::one();
            dt[idx] = S::from_count(time - t_b + 1);
        }
        if time == t_b {
            d[idx] = S::one();
        }
    }
    (du, dt, d)
}

/// Diagnostics of one generalized Dickey–Fuller regression at a fixed break
/// date and lag count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdfRegression<S> {
    /// Levels-form coefficient on the lagged price.
    pub alpha_hat: S,
    /// t-statistic for the unit-root null `alpha = 1`.
    pub t_alpha: S,
    /// All coefficients in column order
    /// (deterministics, lagged level, difference lags).
    pub coefficients: Vec<S>,
    pub standard_errors: Vec<S>,
    pub residual_variance: S,
    pub n_rows: usize,
    /// Names of the columns, aligned with `coefficients`.
    pub column_names: Vec<&'static str>,
}

/// Build the difference-form design for rows `t = row_start..n` (0-based),
/// returning (X, target, column names). Column order: deterministics,
/// `y_{t-1}`, then `p` difference lags.
fn build_design<S: Float>(
    y: &[S],
    dy: &[S],
    variant: BreakVariant,
    t_b: usize,
    p: usize,
    row_start: usize,
) -> (Vec<S>, Vec<S>, Vec<&'static str>) {
    let n = y.len();
    let (du, dt, d_dummy) = break_dummies::<S>(n, t_b);
    let mut names: Vec<&'static str> = vec!["intercept"];
    if variant.has_trend() {
        names.push("trend");
    }
    if variant.has_du() {
        names.push("du");
    }
    if variant.has_dt() {
        names.push("dt");
    }
    if variant.has_one_time() {
        names.push("d");
    }
    names.push("level_lag1");
    let cols = names.len() + p;

    let rows = n - row_start;
    let mut x = Vec::with_capacity(rows * cols);
    let mut target = Vec::with_capacity(rows);
    for t in row_start..n {
        x.push(S::one());
        if variant.has_trend() {
            x.push(S::from_count(t + 1));
        }
        if variant.has_du() {
            x.push(du[t]);
        }
        if variant.has_dt() {
            x.push(dt[t]);
        }
        if variant.has_one_time() {
            x.push(d_dummy[t]);
        }
        x.push(y[t - 1]);
        for i in 1..=p {
            // dy[k] = y[k+1] - y[k]; the difference observed at time t is
            // dy[t-1], so lag i is dy[t-1-i].
            x.push(dy[t - 1 - i]);
        }
        target.push(dy[t - 1]);
    }
    for _ in 0..p {
        names.push("diff_lag");
    }
    (x, target, names)
}

/// One generalized Dickey–Fuller regression at a fixed break date (`t_b`,
/// 1-based) and augmentation lag `p`, on the maximal usable sample.
pub fn adf_regression<S: Float>(
    series: &[S],
    t_b: usize,
    spec: &BreakSpec,
    p: usize,
) -> Result<AdfRegression<S>, UnitRootError> {
    spec.validate()?;
    let n = series.len();
    let det = spec.variant.det_count();
    let cols = det + 1 + p;
    let row_start = p + 1;
    if n <= row_start + cols + 10 {
        return Err(UnitRootError::NotEnoughRows { rows: n.saturating_sub(row_start), cols });
    }
    let dy: Vec<S> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let (x, target, names) = build_design(series, &dy, spec.variant, t_b, p, row_start);
    let rows = target.len();
    let fit = ols(&x, rows, cols, &target)
        .map_err(|_| UnitRootError::DegenerateBreak { t_b })?;
    let level_idx = det;
    let b = fit.coefficients[level_idx];
    let se = fit.standard_errors[level_idx];
    if !se.is_finite() || se <= S::zero() {
        return Err(UnitRootError::DegenerateBreak { t_b });
    }
    Ok(AdfRegression {
        alpha_hat: b + S::one(),
        t_alpha: b / se,
        coefficients: fit.coefficients,
        standard_errors: fit.standard_errors,
        residual_variance: fit.sigma2,
        n_rows: rows,
        column_names: names,
    })
}

/// Select the augmentation lag at one break date on the common sample
/// trimmed by `lag_max`, per the spec's rule.
fn select_lag<S: Float>(
    y: &[S],
    dy: &[S],
    spec: &BreakSpec,
    t_b: usize,
    lag_max: usize,
) -> Result<usize, UnitRootError> {
    let n = y.len();
    let det = spec.variant.det_count();
    let row_start = lag_max + 1;
    let rows = n.saturating_sub(row_start);
    let cols_full = det + 1 + lag_max;
    if rows <= cols_full + 10 {
        return Err(UnitRootError::NotEnoughRows { rows, cols: cols_full });
    }
    let (x, target, _) = build_design(y, dy, spec.variant, t_b, lag_max, row_start);

    // Gram matrix of the full design once; sub-models with fewer lags are
    // leading principal blocks because lag columns come last.
    let mut gram = vec![S::zero(); cols_full * cols_full];
    let mut xty = vec![S::zero(); cols_full];
    let mut yty = S::zero();
    for r in 0..rows {
        let row = &x[r * cols_full..(r + 1) * cols_full];
        let yr = target[r];
        yty += yr * yr;
        for i in 0..cols_full {
            xty[i] += row[i] * yr;
            for j in i..cols_full {
                gram[i * cols_full + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..cols_full {
        for j in 0..i {
            gram[i * cols_full + j] = gram[j * cols_full + i];
        }
    }

    let sub_solve = |k: usize| -> Option<Vec<S>> {
        let mut a = vec![S::zero(); k * k];
        for i in 0..k {
            for j in 0..k {
                a[i * k + j] = gram[i * cols_full + j];
            }
        }
        let mut b: Vec<S> = xty[..k].to_vec();
        linalg::solve(&mut a, &mut b).ok()
    };
    let rss_of = |beta: &[S]| -> S {
        let mut explained = S::zero();
        for (c, b) in beta.iter().zip(xty.iter()) {
            explained += *c * *b;
        }
        (yty - explained).max(S::zero())
    };

    match spec.lag_rule {
        LagRule::Sic => {
            let rows_s = rows as f64;
            let mut best: Option<(f64, usize)> = None;
            for p in 0..=lag_max {
                let k = det + 1 + p;
                let Some(beta) = sub_solve(k) else { continue };
                let rss = rss_of(&beta).as_f64();
                if rss <= 0.0 {
                    continue;
                }
                let sic = rows_s * (rss / rows_s).ln() + k as f64 * rows_s.ln();
                if best.map_or(true, |(b, _)| sic < b) {
                    best = Some((sic, p));
                }
            }
            best.map(|(_, p)| p).ok_or(UnitRootError::DegenerateBreak { t_b })
        }
        LagRule::TSig => {
            for p in (1..=lag_max).rev() {
                let k = det + 1 + p;
                let Some(beta) = sub_solve(k) else { continue };
                let rss = rss_of(&beta);
                let sigma2 = rss / S::from_count(rows - k);
                // Variance of the last coefficient needs the (k,k) entry of
                // the inverse Gram block.
                let mut a = vec![S::zero(); k * k];
                for i in 0..k {
                    for j in 0..k {
                        a[i * k + j] = gram[i * cols_full + j];
                    }
                }
                let Ok(inv) = linalg::invert(&a, k) else { continue };
                let var = sigma2 * inv[(k - 1) * k + (k - 1)];
                if var <= S::zero() {
                    continue;
                }
                let t = beta[k - 1] / var.sqrt();
                if t.abs().as_f64() >= 1.645 {
                    return Ok(p);
                }
            }
            Ok(0)
        }
    }
}

/// Scan every admissible break date, pick the one minimizing the t-statistic
/// on the lagged level, and report the profile. The p-value field stays
/// empty until a simulated null distribution is attached.
pub fn breakpoint_adf<S: Float>(
    series: &[S],
    spec: &BreakSpec,
) -> Result<BreakAdfResult<S>, UnitRootError> {
    spec.validate()?;
    let n = series.len();
    let lag_max = spec.effective_lag_max(n);
    let det = spec.variant.det_count();
    let needed = lag_max + det + 30;
    if n < needed {
        return Err(UnitRootError::TooShort { got: n, needed });
    }

    let dy: Vec<S> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let lo = ((spec.trimming * n as f64).ceil() as usize).max(2);
    let hi = (((1.0 - spec.trimming) * n as f64).floor() as usize).min(n - 1);
    if lo >= hi {
        return Err(UnitRootError::TooShort { got: n, needed: needed.max(8) });
    }

    let mut profile: Vec<ProfilePoint<S>> = Vec::with_capacity(hi - lo + 1);
    let mut best: Option<(usize, S, usize, S)> = None; // (t_b, t, lag, alpha)
    for t_b in lo..=hi {
        let Ok(lag) = select_lag(series, &dy, spec, t_b, lag_max) else { continue };
        let Ok(reg) = adf_regression(series, t_b, spec, lag) else { continue };
        profile.push(ProfilePoint { time: t_b, t_stat: reg.t_alpha, lag });
        let better = match &best {
            Some((_, t, _, _)) => reg.t_alpha < *t,
            None => true,
        };
        if better {
            best = Some((t_b, reg.t_alpha, lag, reg.alpha_hat));
        }
    }
    let (t_b, min_t, chosen_lag, alpha_hat) = best.ok_or(UnitRootError::NoValidBreak)?;
    Ok(BreakAdfResult {
        min_t,
        break_index: t_b - 1,
        alpha_hat,
        chosen_lag,
        p_value: None,
        per_date_t: profile,
    })
}
