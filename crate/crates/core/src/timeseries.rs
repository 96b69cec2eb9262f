//! Moving-window error budgets and their summary statistics.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use statrs::function::erf::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_window, group_sequences, EstimatorOptions, ErrorBudget, WindowData};
use crate::protocol::MeasurementRecord;
use crate::stats::{mean, percentile_sorted, sample_sd};

pub const DEFAULT_WINDOW: usize = 30;
pub const DEFAULT_OVERLAP: f64 = 0.5;
pub const DEFAULT_BINS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    /// Cycles per window.
    pub n: usize,
    pub overlap_fraction: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { n: DEFAULT_WINDOW, overlap_fraction: DEFAULT_OVERLAP }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("window n must be >= 2, got {}", self.n)));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::Config(format!("overlap_fraction must be in [0, 1), got {}", self.overlap_fraction)));
        }
        Ok(())
    }

    pub fn step(&self) -> usize {
        ((self.n as f64 * (1.0 - self.overlap_fraction)).round() as usize).max(1)
    }
}

/// Half-open cycle ranges `[i·step, i·step + n)` that fit in `cycle_count`.
pub fn make_windows(cycle_count: usize, config: &WindowConfig) -> Vec<(usize, usize)> {
    let step = config.step();
    (0..)
        .map(|i| (i * step, i * step + config.n))
        .take_while(|&(_, end)| end <= cycle_count)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    pub index: usize,
    pub point: String,
    pub first_cycle: u32,
    pub last_cycle: u32,
    /// Hours.
    pub midpoint: f64,
    /// Fit failure code, or the budget.
    pub budget: std::result::Result<ErrorBudget, String>,
}

impl WindowEstimate {
    pub fn status(&self) -> &str {
        match &self.budget {
            Ok(b) if b.low_confidence => "low_confidence",
            Ok(_) => "ok",
            Err(code) => code,
        }
    }
}

/// Window series for every operating point, ordered by point label then
/// window index. Windows count distinct cycles present in the records.
/// Incomplete sequences are dropped and returned alongside.
pub fn window_series(
    records: &[MeasurementRecord],
    config: &WindowConfig,
    opts: &EstimatorOptions,
    seed: u64,
) -> Result<(Vec<WindowEstimate>, Vec<Error>)> {
    config.validate()?;
    let mut by_point: BTreeMap<&str, Vec<&MeasurementRecord>> = BTreeMap::new();
    for r in records {
        by_point.entry(r.point.as_str()).or_default().push(r);
    }
    let mut series = Vec::new();
    let mut rejected = Vec::new();
    for (pi, (label, recs)) in by_point.into_iter().enumerate() {
        let cycles: Vec<u32> = recs.iter().map(|r| r.cycle).collect::<BTreeSet<_>>().into_iter().collect();
        let windows = make_windows(cycles.len(), config);
        if windows.is_empty() {
            return Err(Error::InsufficientData(format!(
                "insufficient cycles: point {label} has {} cycles, window needs {}",
                cycles.len(),
                config.n
            )));
        }
        let mut wall: BTreeMap<u32, f64> = BTreeMap::new();
        for r in &recs {
            wall.entry(r.cycle).or_insert(r.wall_time);
        }
        let (sequences, bad) = group_sequences(recs.iter().copied());
        rejected.extend(bad);

        let estimates: Vec<WindowEstimate> = windows
            .par_iter()
            .enumerate()
            .map(|(wi, &(start, end))| {
                let (first, last) = (cycles[start], cycles[end - 1]);
                let data = WindowData::from_sequences(sequences.iter().filter(|s| (first..=last).contains(&s.cycle)).copied());
                let budget = estimate_window(&data, opts, seed, &[pi as u64, wi as u64]).map_err(|e| e.code().to_string());
                WindowEstimate {
                    index: wi,
                    point: label.to_string(),
                    first_cycle: first,
                    last_cycle: last,
                    midpoint: 0.5 * (wall[&first] + wall[&last]),
                    budget,
                }
            })
            .collect();
        series.extend(estimates);
    }
    Ok((series, rejected))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// `100·SD/mean`; `None` when the mean is zero.
    pub cv_percent: Option<f64>,
}

impl SummaryStats {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!("summary needs >= 2 values, got {}", values.len())));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mu = mean(values);
    let sd = sample_sd(values);
    Ok(SummaryStats {
        count: values.len(),
        mean: mu,
        sd,
        median: percentile_sorted(&sorted, 0.5),
        q25: percentile_sorted(&sorted, 0.25),
        q75: percentile_sorted(&sorted, 0.75),
        cv_percent: (mu != 0.0).then(|| 100.0 * sd / mu),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFit {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    /// Normal fit by sample mean and SD.
    pub mu: f64,
    pub sigma: f64,
    /// All values equal; a single bin holds everything.
    pub degenerate: bool,
}

impl HistogramFit {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        (self.lo + i as f64 * w, if i + 1 == self.counts.len() { self.hi } else { self.lo + (i + 1) as f64 * w })
    }

    /// Expected count in bin `i` under the fitted normal.
    pub fn expected(&self, i: usize) -> f64 {
        if self.sigma == 0.0 {
            return if i == 0 { self.counts.iter().sum::<usize>() as f64 } else { 0.0 };
        }
        let n: usize = self.counts.iter().sum();
        let (a, b) = self.bin_edges(i);
        n as f64 * (normal_cdf((b - self.mu) / self.sigma) - normal_cdf((a - self.mu) / self.sigma))
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Equal-width bins over `[min, max]`, last bin closed.
pub fn histogram_fit(values: &[f64], bins: usize) -> Result<HistogramFit> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!("histogram needs >= 2 values, got {}", values.len())));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mu, sigma) = (mean(values), sample_sd(values));
    if hi == lo {
        return Ok(HistogramFit { lo, hi, counts: vec![values.len()], mu, sigma: 0.0, degenerate: true });
    }
    let mut counts = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(HistogramFit { lo, hi, counts, mu, sigma, degenerate: false })
}
