//! Monte-Carlo null distribution of the min-t statistic.
//!
//! Driftless random walks are simulated and pushed through the identical
//! min-t break search; the empirical distribution of the resulting statistics
//! supplies p-values. Replications derive their seeds from
//! `(master seed, replication index)`, so parallel and serial runs agree, and
//! finished distributions can be cached to CSV under a content-addressed name.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::rng::{self, Stream};

use super::{breakpoint_adf, BreakSpec, LagRule, UnitRootError};

/// Sorted empirical distribution of min-t under the unit-root null, keyed by
/// everything that shaped it.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    pub spec: BreakSpec,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Ascending min-t draws; length `reps` minus any degenerate replications
    /// (which are vanishingly rare and simply dropped).
    pub values: Vec<f64>,
}

impl NullDistribution {
    /// Left-tail empirical p-value: the fraction of simulated statistics at
    /// or below the observed one.
    pub fn p_value(&self, observed: f64) -> f64 {
        let count = self.values.partition_point(|v| *v <= observed);
        count as f64 / self.values.len() as f64
    }

    /// Lower quantile (e.g. 0.05 for the 5% critical value).
    pub fn quantile(&self, q: f64) -> f64 {
        let idx = ((q * self.values.len() as f64).ceil() as usize)
            .clamp(1, self.values.len());
        self.values[idx - 1]
    }

    fn cache_key(spec: &BreakSpec, n: usize, reps: usize, seed: u64) -> String {
        let lag_rule = match spec.lag_rule {
            LagRule::Sic => "sic",
            LagRule::TSig => "t_sig",
        };
        let descriptor = format!(
            "variant={};trimming={};lag_max={:?};lag_rule={};n={};reps={};seed={}",
            spec.variant.name(),
            spec.trimming,
            spec.lag_max,
            lag_rule,
            n,
            reps,
            seed
        );
        let mut hasher = Sha256::new();
        hasher.update(descriptor.as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().take(12).map(|b| format!("{b:02x}")).collect();
        format!("nulldist-{hex}.csv")
    }

    pub fn cache_path(dir: &Path, spec: &BreakSpec, n: usize, reps: usize, seed: u64) -> PathBuf {
        dir.join(Self::cache_key(spec, n, reps, seed))
    }

    pub fn save_csv(&self, dir: &Path) -> Result<PathBuf, UnitRootError> {
        fs::create_dir_all(dir)?;
        let path = Self::cache_path(dir, &self.spec, self.n, self.reps, self.seed);
        let mut out = String::new();
        out.push_str("# variant,trimming,lag_max,lag_rule,n,reps,seed\n");
        let lag_rule = match self.spec.lag_rule {
            LagRule::Sic => "sic",
            LagRule::TSig => "t_sig",
        };
        out.push_str(&format!(
            "# {},{},{},{},{},{},{}\n",
            self.spec.variant.name(),
            self.spec.trimming,
            self.spec.lag_max.map(|v| v.to_string()).unwrap_or_else(|| "auto".into()),
            lag_rule,
            self.n,
            self.reps,
            self.seed
        ));
        out.push_str("min_t\n");
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        let tmp = path.with_extension("csv.tmp");
        fs::write(&tmp, out)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    pub fn load_csv(
        dir: &Path,
        spec: &BreakSpec,
        n: usize,
        reps: usize,
        seed: u64,
    ) -> Result<Option<Self>, UnitRootError> {
        let path = Self::cache_path(dir, spec, n, reps, seed);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let mut values = Vec::with_capacity(reps);
        for line in text.lines() {
            if line.starts_with('#') || line == "min_t" || line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| UnitRootError::CacheCorrupt(format!("bad value {line:?}")))?;
            values.push(v);
        }
        if values.is_empty() {
            return Err(UnitRootError::CacheCorrupt("no values".into()));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(UnitRootError::CacheCorrupt("values not sorted".into()));
        }
        Ok(Some(Self { spec: *spec, n, reps, seed, values }))
    }
}

/// Simulate the empirical null distribution of min-t for samples of length
/// `n`. Needs at least 100 replications; 1000+ for stable tail quantiles.
pub fn simulate_null(
    spec: &BreakSpec,
    n: usize,
    reps: usize,
    seed: u64,
    parallel: bool,
) -> Result<NullDistribution, UnitRootError> {
    spec.validate()?;
    if reps < 100 {
        return Err(UnitRootError::TooFewReps(reps));
    }

    let one = |rep: u64| -> Option<f64> {
        let mut stream = rng::stream(seed, Stream::Replication, rep);
        let mut level = 0.0f64;
        let mut walk = Vec::with_capacity(n);
        for _ in 0..n {
            level += rng::standard_normal::<f64>(&mut stream);
            walk.push(level);
        }
        breakpoint_adf(&walk, spec).ok().map(|r| r.min_t)
    };

    let mut values: Vec<f64> = if parallel {
        (0..reps as u64).into_par_iter().filter_map(one).collect()
    } else {
        (0..reps as u64).filter_map(one).collect()
    };
    if values.is_empty() {
        return Err(UnitRootError::NoValidBreak);
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    Ok(NullDistribution { spec: *spec, n, reps, seed, values })
}

/// Load a cached distribution or simulate and cache it.
pub fn load_or_simulate(
    dir: &Path,
    spec: &BreakSpec,
    n: usize,
    reps: usize,
    seed: u64,
    parallel: bool,
) -> Result<NullDistribution, UnitRootError> {
    if let Some(found) = NullDistribution::load_csv(dir, spec, n, reps, seed)? {
        return Ok(found);
    }
    let dist = simulate_null(spec, n, reps, seed, parallel)?;
    dist.save_csv(dir)?;
    Ok(dist)
}
