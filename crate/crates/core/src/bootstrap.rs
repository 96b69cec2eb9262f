//! Stratified percentile bootstrap.
//!
//! Each stratum (one sequence length) is resampled with replacement to its
//! own size; whole units are drawn, so anything paired inside a unit stays
//! paired. Resample `r` draws from its own stream keyed by `(key…, r)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Domain};
use crate::stats::percentile_sorted;

pub const DEFAULT_RESAMPLES: usize = 1000;
/// Lower and upper quantiles of a central 1σ (68.27%) interval.
pub const ONE_SIGMA_QUANTILES: (f64, f64) = (0.158_655_253_931_457, 0.841_344_746_068_543);
/// Units per stratum below which intervals are widened and flagged.
pub const MIN_UNITS: usize = 10;
/// Failed-resample fraction above which an interval is flagged.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn around(center: f64, half_width: f64) -> Self {
        Self { lo: center - half_width, hi: center + half_width }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult<const K: usize> {
    pub intervals: [Interval; K],
    pub resamples: usize,
    pub failures: usize,
    /// Too few units per stratum or too many failed resamples.
    pub low_confidence: bool,
}

/// 68% percentile intervals of a `K`-valued statistic. Returns `None` when no
/// resample produced a value.
///
/// With fewer than [`MIN_UNITS`] units in some stratum the intervals are
/// widened about their midpoint by `sqrt(MIN_UNITS / n_min)`.
pub fn bootstrap_ci<T, F, const K: usize>(
    strata: &[Vec<T>],
    statistic: F,
    resamples: usize,
    seed: u64,
    key: &[u64],
) -> Option<BootstrapResult<K>>
where
    T: Clone + Send + Sync,
    F: Fn(&[Vec<T>]) -> Option<[f64; K]> + Sync,
{
    if resamples == 0 || strata.iter().any(|s| s.is_empty()) {
        return None;
    }
    let values: Vec<Option<[f64; K]>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut path = key.to_vec();
            path.push(r as u64);
            let mut rng = stream(seed, Domain::Bootstrap, &path);
            let resampled: Vec<Vec<T>> = strata
                .iter()
                .map(|s| (0..s.len()).map(|_| s[rng.random_range(0..s.len())].clone()).collect())
                .collect();
            statistic(&resampled).filter(|v| v.iter().all(|x| x.is_finite()))
        })
        .collect();
    let ok: Vec<[f64; K]> = values.into_iter().flatten().collect();
    if ok.is_empty() {
        return None;
    }
    let failures = resamples - ok.len();
    let n_min = strata.iter().map(Vec::len).min().unwrap_or(0);
    let widen = if n_min < MIN_UNITS { (MIN_UNITS as f64 / n_min as f64).sqrt() } else { 1.0 };
    let intervals = std::array::from_fn(|k| {
        let mut col: Vec<f64> = ok.iter().map(|v| v[k]).collect();
        col.sort_by(f64::total_cmp);
        let lo = percentile_sorted(&col, ONE_SIGMA_QUANTILES.0);
        let hi = percentile_sorted(&col, ONE_SIGMA_QUANTILES.1);
        let mid = 0.5 * (lo + hi);
        Interval::around(mid, 0.5 * (hi - lo) * widen)
    });
    Some(BootstrapResult {
        intervals,
        resamples,
        failures,
        low_confidence: n_min < MIN_UNITS || failures as f64 > MAX_FAILURE_FRACTION * resamples as f64,
    })
}
