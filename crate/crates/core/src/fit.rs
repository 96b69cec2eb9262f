//! Weighted exponential decay fits `y(m) = A·r^m + B`.
//!
//! The offset `B` is either free, fixed at ½ (the paired-target survival
//! average) or fixed at 0 (offset-free purity). The solver seeds `A` and `r`
//! from a weighted log-linear fit of `y − B₀` and refines with a damped
//! Gauss–Newton (Levenberg–Marquardt) iteration until the relative parameter
//! step drops below 1e-10 or 200 iterations pass. Covariances come from the
//! final Jacobian.
//!
//! A known accumulation constant `c` adds `c·(1 − r^m)/(1 − r)` to the
//! model. Purity under relaxation carries this term: every gate adds the
//! squared non-unital shift `c`, which then decays like the rest.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_ITERATIONS: usize = 200;
pub const RELATIVE_TOLERANCE: f64 = 1e-10;
/// Fixed slack above 1 allowed on the fitted rate.
pub const RATE_SLACK: f64 = 1e-6;
/// Additional slack above 1, in units of the rate's standard error.
pub const RATE_SIGMA_SLACK: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// Survival probability `A·p^m + B`.
    PWithOffset,
    /// Mean purity `A·u^m + B`.
    PurityWithOffset,
    /// Paired-target average `A·p^m + ½`.
    AHatFixedHalf,
    /// Offset-free purity `A·u^m`.
    BHatZeroOffset,
}

impl DecayModel {
    /// `None` when the offset is a free parameter.
    pub fn fixed_offset(self) -> Option<f64> {
        match self {
            DecayModel::PWithOffset | DecayModel::PurityWithOffset => None,
            DecayModel::AHatFixedHalf => Some(0.5),
            DecayModel::BHatZeroOffset => Some(0.0),
        }
    }

    fn offset_guess(self) -> f64 {
        match self {
            DecayModel::PWithOffset | DecayModel::AHatFixedHalf => 0.5,
            DecayModel::PurityWithOffset | DecayModel::BHatZeroOffset => 0.0,
        }
    }

    pub fn parameter_count(self) -> usize {
        if self.fixed_offset().is_some() {
            2
        } else {
            3
        }
    }

    pub fn min_lengths(self) -> usize {
        self.parameter_count()
    }

    pub fn name(self) -> &'static str {
        match self {
            DecayModel::PWithOffset => "p_with_offset",
            DecayModel::PurityWithOffset => "purity_with_offset",
            DecayModel::AHatFixedHalf => "a_hat_fixed_half",
            DecayModel::BHatZeroOffset => "b_hat_zero_offset",
        }
    }
}

/// One averaged data point. `weight` is an inverse variance when the fit is
/// run with [`Weighting::InverseVariance`], otherwise ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub m: f64,
    pub value: f64,
    pub weight: f64,
}

impl DecayPoint {
    pub fn new(m: f64, value: f64) -> Self {
        Self { m, value, weight: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Equal weights; covariance scaled by the residual variance.
    Unweighted,
    /// Weights are absolute inverse variances.
    InverseVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub amplitude: f64,
    pub rate: f64,
    /// Absent for fixed-offset models.
    pub offset: Option<f64>,
    pub amplitude_se: f64,
    pub rate_se: f64,
    pub offset_se: Option<f64>,
    /// Weighted residual sum of squares.
    pub residual: f64,
    pub iterations: usize,
    /// Known accumulation constant the fit was run with.
    #[serde(default)]
    pub accumulation: f64,
}

impl DecayFit {
    pub fn predict(&self, m: f64) -> f64 {
        self.amplitude * self.rate.powf(m)
            + self.offset.or(self.model.fixed_offset()).unwrap_or(0.0)
            + self.accumulation * geometric_sum(self.rate, m).0
    }
}

/// `(1 − r^m)/(1 − r)` and its derivative in `r`, with a series near `r = 1`.
pub fn geometric_sum(r: f64, m: f64) -> (f64, f64) {
    let d = 1.0 - r;
    if d.abs() < 1e-6 {
        let a = m * (m - 1.0) / 2.0;
        let b = m * (m - 1.0) * (m - 2.0) / 6.0;
        (m - a * d + b * d * d, a - 2.0 * b * d)
    } else {
        let rm = r.powf(m);
        ((1.0 - rm) / d, ((1.0 - rm) - m * r.powf(m - 1.0) * d) / (d * d))
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum FitError {
    #[error("need {need} distinct lengths, got {got}")]
    TooFewLengths { need: usize, got: usize },
    #[error("all values are equal")]
    Degenerate,
    #[error("invalid input point")]
    InvalidInput,
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("singular normal matrix")]
    Singular,
    #[error("rate {rate} outside (0, 1]")]
    RateOutOfRange { rate: f64 },
}

impl FitError {
    pub fn code(&self) -> &'static str {
        match self {
            FitError::TooFewLengths { .. } => "too_few_lengths",
            FitError::Degenerate => "degenerate",
            FitError::InvalidInput => "invalid_input",
            FitError::NoConvergence { .. } => "no_convergence",
            FitError::Singular => "singular",
            FitError::RateOutOfRange { .. } => "rate_out_of_range",
        }
    }
}

struct Problem<'a> {
    points: &'a [DecayPoint],
    model: DecayModel,
    sqrt_w: Vec<f64>,
    accumulation: f64,
}

impl Problem<'_> {
    fn offset(&self, theta: &[f64]) -> f64 {
        self.model.fixed_offset().unwrap_or_else(|| theta[2])
    }

    fn residuals(&self, theta: &[f64]) -> DVector<f64> {
        let b = self.offset(theta);
        DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .zip(&self.sqrt_w)
                .map(|(p, w)| {
                    let acc = self.accumulation * geometric_sum(theta[1], p.m).0;
                    w * (p.value - (theta[0] * theta[1].powf(p.m) + b + acc))
                }),
        )
    }

    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let k = self.model.parameter_count();
        let mut j = DMatrix::zeros(self.points.len(), k);
        for (i, (p, w)) in self.points.iter().zip(&self.sqrt_w).enumerate() {
            let rm = theta[1].powf(p.m);
            j[(i, 0)] = w * rm;
            let decay = if p.m == 0.0 { 0.0 } else { theta[0] * p.m * theta[1].powf(p.m - 1.0) };
            j[(i, 1)] = w * (decay + self.accumulation * geometric_sum(theta[1], p.m).1);
            if k == 3 {
                j[(i, 2)] = *w;
            }
        }
        j
    }
}

fn initial_guess(problem: &Problem<'_>) -> Vec<f64> {
    let b0 = problem.model.offset_guess();
    // Weighted least squares of ln(y − B₀) against m.
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, w) in problem.points.iter().zip(&problem.sqrt_w) {
        let d = p.value - b0;
        if d > 0.0 {
            let wt = w * w * d * d;
            let ly = d.ln();
            sw += wt;
            sx += wt * p.m;
            sy += wt * ly;
            sxx += wt * p.m * p.m;
            sxy += wt * p.m * ly;
        }
    }
    let denom = sw * sxx - sx * sx;
    let (mut a, mut r) = if sw > 0.0 && denom.abs() > 1e-300 {
        let slope = (sw * sxy - sx * sy) / denom;
        let intercept = (sy - slope * sx) / sw;
        (intercept.exp(), slope.exp())
    } else {
        (f64::NAN, f64::NAN)
    };
    if !(r.is_finite() && r > 0.0) {
        r = 0.99;
    }
    if !a.is_finite() {
        let max = problem.points.iter().map(|p| p.value).fold(f64::MIN, f64::max);
        a = max - b0;
    }
    let mut theta = vec![a, r.min(1.5)];
    if problem.model.fixed_offset().is_none() {
        theta.push(b0);
    }
    theta
}

/// Fits `points` to `model`.
pub fn fit_decay(points: &[DecayPoint], model: DecayModel, weighting: Weighting) -> Result<DecayFit, FitError> {
    fit_decay_accumulating(points, model, weighting, 0.0)
}

/// Fits `points` to `model` plus the accumulation term with constant `c`.
pub fn fit_decay_accumulating(
    points: &[DecayPoint],
    model: DecayModel,
    weighting: Weighting,
    accumulation: f64,
) -> Result<DecayFit, FitError> {
    if !accumulation.is_finite() {
        return Err(FitError::InvalidInput);
    }
    if points.iter().any(|p| !p.value.is_finite() || !p.m.is_finite() || !(p.weight > 0.0)) {
        return Err(FitError::InvalidInput);
    }
    let mut lengths: Vec<f64> = points.iter().map(|p| p.m).collect();
    lengths.sort_by(f64::total_cmp);
    lengths.dedup();
    if lengths.len() < model.min_lengths() {
        return Err(FitError::TooFewLengths { need: model.min_lengths(), got: lengths.len() });
    }
    let (lo, hi) = points.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.value), hi.max(p.value)));
    if hi - lo <= 1e-15 * hi.abs().max(1.0) {
        return Err(FitError::Degenerate);
    }

    let sqrt_w = match weighting {
        Weighting::Unweighted => vec![1.0; points.len()],
        Weighting::InverseVariance => points.iter().map(|p| p.weight.sqrt()).collect(),
    };
    let problem = Problem { points, model, sqrt_w, accumulation };
    let k = model.parameter_count();
    let mut theta = initial_guess(&problem);
    let mut res = problem.residuals(&theta);
    let mut cost = res.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let j = problem.jacobian(&theta);
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * &res;
        let mut accepted = false;
        while lambda < 1e20 {
            let mut damped = jtj.clone();
            for d in 0..k {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            if !(trial[1] > 0.0) || trial.iter().any(|v| !v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let trial_res = problem.residuals(&trial);
            let trial_cost = trial_res.norm_squared();
            if trial_cost <= cost {
                let step_norm = step.norm();
                let theta_norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
                theta = trial;
                res = trial_res;
                cost = trial_cost;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                if step_norm <= RELATIVE_TOLERANCE * (theta_norm + RELATIVE_TOLERANCE) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step exists at any damping: a stationary point.
            converged = grad.norm() <= 1e-8 * (cost.sqrt() + 1e-12) || cost <= 1e-28;
            break;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(FitError::NoConvergence { iterations });
    }

    let j = problem.jacobian(&theta);
    let jtj = j.transpose() * &j;
    let inv = jtj.try_inverse().ok_or(FitError::Singular)?;
    let n = points.len();
    let scale = match weighting {
        Weighting::InverseVariance => 1.0,
        Weighting::Unweighted => cost / (n.saturating_sub(k)).max(1) as f64,
    };
    let se = |i: usize| (inv[(i, i)] * scale).max(0.0).sqrt();
    let rate = theta[1];
    let rate_se = se(1);
    if !(rate > 0.0) || rate > 1.0 + RATE_SLACK + RATE_SIGMA_SLACK * rate_se {
        return Err(FitError::RateOutOfRange { rate });
    }
    Ok(DecayFit {
        model,
        amplitude: theta[0],
        rate,
        offset: (k == 3).then(|| theta[2]),
        amplitude_se: se(0),
        rate_se,
        offset_se: (k == 3).then(|| se(2)),
        residual: cost,
        iterations,
        accumulation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use rand_distr::{Distribution, Normal};

    const LENGTHS: [f64; 7] = [2.0, 6.0, 13.0, 25.0, 50.0, 100.0, 200.0];

    fn exact(a: f64, r: f64, b: f64) -> Vec<DecayPoint> {
        LENGTHS.iter().map(|&m| DecayPoint::new(m, a * r.powf(m) + b)).collect()
    }

    #[test]
    fn exact_round_trip_with_offset() {
        let fit = fit_decay(&exact(0.5, 0.99, 0.5), DecayModel::PWithOffset, Weighting::Unweighted).unwrap();
        assert!((fit.amplitude - 0.5).abs() < 1e-8);
        assert!((fit.rate - 0.99).abs() < 1e-8);
        assert!((fit.offset.unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn exact_round_trip_fixed_models() {
        let fit = fit_decay(&exact(0.45, 0.993, 0.5), DecayModel::AHatFixedHalf, Weighting::Unweighted).unwrap();
        assert!((fit.amplitude - 0.45).abs() < 1e-8 && (fit.rate - 0.993).abs() < 1e-10);
        assert!(fit.offset.is_none() && fit.offset_se.is_none());
        let fit = fit_decay(&exact(0.9, 0.98, 0.0), DecayModel::BHatZeroOffset, Weighting::Unweighted).unwrap();
        assert!((fit.amplitude - 0.9).abs() < 1e-8 && (fit.rate - 0.98).abs() < 1e-10);
    }

    #[test]
    fn exact_round_trip_with_accumulation() {
        let c = 2.5e-5;
        let pts: Vec<_> = LENGTHS
            .iter()
            .map(|&m| {
                let s: f64 = (0..m as i32).map(|k| 0.9934f64.powi(k)).sum();
                DecayPoint::new(m, 0.99 * 0.9934f64.powf(m) + c * s)
            })
            .collect();
        let fit = fit_decay_accumulating(&pts, DecayModel::BHatZeroOffset, Weighting::Unweighted, c).unwrap();
        assert!((fit.rate - 0.9934).abs() < 1e-10 && (fit.amplitude - 0.99).abs() < 1e-8);
        assert!((fit.predict(50.0) - pts[4].value).abs() < 1e-12);
        // Ignoring the term biases the rate upward.
        let naive = fit_decay(&pts, DecayModel::BHatZeroOffset, Weighting::Unweighted).unwrap();
        assert!(naive.rate > fit.rate + 1e-5);
    }

    #[test]
    fn geometric_sum_branches_agree() {
        for m in [1u32, 2, 13, 200] {
            let mf = m as f64;
            let (s, ds) = geometric_sum(1.0, mf);
            assert_eq!(s, mf);
            assert!((ds - mf * (mf - 1.0) / 2.0).abs() < 1e-12);
            for r in [1.0f64 - 5e-7, 1.0 - 2e-6, 1.0 - 1e-3] {
                let direct: f64 = (0..m).map(|k| r.powi(k as i32)).sum();
                let direct_d: f64 = (1..m).map(|k| k as f64 * r.powi(k as i32 - 1)).sum();
                let (s, ds) = geometric_sum(r, mf);
                assert!((s - direct).abs() <= 1e-9 * direct, "{m} {r}");
                assert!((ds - direct_d).abs() <= 1e-4 * direct_d.max(1.0), "{m} {r}: {ds} {direct_d}");
            }
        }
        let r = 0.97f64;
        let direct: f64 = (0..25).map(|k| r.powi(k)).sum();
        assert!((geometric_sum(r, 25.0).0 - direct).abs() < 1e-12);
    }

    #[test]
    fn exact_round_trip_purity_offset() {
        let fit = fit_decay(&exact(0.8, 0.97, 0.05), DecayModel::PurityWithOffset, Weighting::Unweighted).unwrap();
        assert!((fit.rate - 0.97).abs() < 1e-8 && (fit.offset.unwrap() - 0.05).abs() < 1e-8);
    }

    #[test]
    fn constant_data_fails() {
        let pts: Vec<_> = LENGTHS.iter().map(|&m| DecayPoint::new(m, 0.7)).collect();
        assert_eq!(
            fit_decay(&pts, DecayModel::BHatZeroOffset, Weighting::Unweighted),
            Err(FitError::Degenerate)
        );
    }

    #[test]
    fn too_few_lengths() {
        let pts = vec![DecayPoint::new(2.0, 0.9), DecayPoint::new(6.0, 0.8)];
        assert!(matches!(
            fit_decay(&pts, DecayModel::PWithOffset, Weighting::Unweighted),
            Err(FitError::TooFewLengths { need: 3, got: 2 })
        ));
        assert!(fit_decay(&pts, DecayModel::AHatFixedHalf, Weighting::Unweighted).is_ok());
    }

    #[test]
    fn growth_is_rejected() {
        let pts: Vec<_> = LENGTHS.iter().map(|&m| DecayPoint::new(m, 0.1 * 1.01f64.powf(m))).collect();
        assert!(matches!(
            fit_decay(&pts, DecayModel::BHatZeroOffset, Weighting::Unweighted),
            Err(FitError::RateOutOfRange { .. })
        ));
    }

    #[test]
    fn one_sigma_coverage_under_gaussian_noise() {
        // Known-σ weights, so the reported SE is the absolute 1σ.
        let sigma = 0.005;
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut covered = 0;
        let trials = 200;
        for t in 0..trials {
            let mut rng = stream(17, Domain::Aux, &[t]);
            let pts: Vec<_> = exact(0.5, 0.99, 0.5)
                .into_iter()
                .map(|p| DecayPoint { value: p.value + noise.sample(&mut rng), weight: 1.0 / (sigma * sigma), ..p })
                .collect();
            let fit = fit_decay(&pts, DecayModel::PWithOffset, Weighting::InverseVariance).unwrap();
            if (fit.rate - 0.99).abs() <= fit.rate_se {
                covered += 1;
            }
        }
        let rate = covered as f64 / trials as f64;
        // 68% ± 3 binomial standard errors.
        let tol = 3.0 * (0.68f64 * 0.32 / trials as f64).sqrt();
        assert!((rate - 0.68).abs() <= tol, "coverage {rate}");
    }
}
