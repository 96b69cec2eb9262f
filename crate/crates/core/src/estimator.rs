//! From measurement records to error budgets.
//!
//! Two pipelines are available:
//!
//! * offset-eliminated (default): the paired-target average `â` fitted to
//!   `A·p^m + ½`, and the shot-corrected mean purity `b̂` fitted to `A·u^m`;
//! * with-offset: the z survival probability fitted to `A·p^m + B` and the
//!   mean purity fitted to `A·u^m + B`.
//!
//! Either way `ε = (1 − p)/2`, `ε_inc = (1 − √u)/2` and `ε_coh = ε − ε_inc`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bloch::ShotCounts;
use crate::bootstrap::{bootstrap_ci, Interval, DEFAULT_RESAMPLES};
use crate::error::{Error, Result};
use crate::fit::{fit_decay, fit_decay_accumulating, DecayFit, DecayModel, DecayPoint, FitError, Weighting, RATE_SLACK};
use crate::protocol::{MeasurementRecord, Variant};
use crate::stats::{mean, sample_variance};

/// Sequences per length below which fits are unweighted.
pub const MIN_SEQUENCES_FOR_WEIGHTS: usize = 5;

/// Estimated Bloch components of one sequence, with their shot counts in
/// (x, y, z) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationTriple {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub counts: [ShotCounts; 3],
}

impl ExpectationTriple {
    pub fn from_counts(x: ShotCounts, y: ShotCounts, z: ShotCounts) -> Self {
        Self { x: x.expectation(), y: y.expectation(), z: z.expectation(), counts: [x, y, z] }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Every component minus `shift`; shot counts are kept.
    pub fn shifted(&self, shift: f64) -> Self {
        Self { x: self.x - shift, y: self.y - shift, z: self.z - shift, counts: self.counts }
    }

    /// Sum over components of the unbiased estimate of `Var(⟨σk⟩)` from shot
    /// noise, `4·p̂(1 − p̂)/(N − 1)`.
    pub fn shot_variance(&self) -> f64 {
        self.counts
            .iter()
            .map(|c| {
                if c.shots < 2 {
                    0.0
                } else {
                    let p = c.frequency();
                    4.0 * p * (1.0 - p) / (c.shots - 1) as f64
                }
            })
            .sum()
    }
}

/// One executed sub-sequence with all its variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceData {
    pub sequence_id: u64,
    pub m: u32,
    pub cycle: u32,
    pub z: ShotCounts,
    pub x: ShotCounts,
    pub y: ShotCounts,
    pub z_flip: Option<ShotCounts>,
}

impl SequenceData {
    pub fn triple(&self) -> ExpectationTriple {
        ExpectationTriple::from_counts(self.x, self.y, self.z)
    }
}

fn counts_of(r: &MeasurementRecord) -> Result<ShotCounts> {
    ShotCounts::new(r.shots, r.ones)
}

/// `⟨σk⟩ = 2·ones/shots − 1` for the z, x and y records of one sequence.
pub fn expectations_from_records(records: &[&MeasurementRecord]) -> Result<ExpectationTriple> {
    let seq = sequence_from_records(records)?;
    Ok(seq.triple())
}

/// Collects the variants of one sequence id. z, x and y are required;
/// z_flip is optional.
pub fn sequence_from_records(records: &[&MeasurementRecord]) -> Result<SequenceData> {
    let first = records.first().ok_or_else(|| Error::InvalidArgument("no records for sequence".into()))?;
    let id = first.sequence_id;
    let mut slots: [Option<ShotCounts>; 4] = [None; 4];
    for r in records {
        if r.sequence_id != id || r.m != first.m {
            return Err(Error::IncompleteSequence { sequence_id: id, reason: "mixed sequence ids or lengths".into() });
        }
        let slot = &mut slots[r.variant as usize];
        if slot.is_some() {
            return Err(Error::IncompleteSequence {
                sequence_id: id,
                reason: format!("duplicate {} variant", r.variant.as_str()),
            });
        }
        *slot = Some(counts_of(r)?);
    }
    let need = |v: Variant| {
        slots[v as usize].ok_or_else(|| Error::IncompleteSequence {
            sequence_id: id,
            reason: format!("missing {} variant", v.as_str()),
        })
    };
    Ok(SequenceData {
        sequence_id: id,
        m: first.m,
        cycle: first.cycle,
        z: need(Variant::Z)?,
        x: need(Variant::X)?,
        y: need(Variant::Y)?,
        z_flip: slots[Variant::ZFlip as usize],
    })
}

/// Groups records by sequence id. Incomplete sequences are returned as
/// diagnostics instead of failing the batch.
pub fn group_sequences<'a, I>(records: I) -> (Vec<SequenceData>, Vec<Error>)
where
    I: IntoIterator<Item = &'a MeasurementRecord>,
{
    let mut by_id: BTreeMap<u64, Vec<&MeasurementRecord>> = BTreeMap::new();
    for r in records {
        by_id.entry(r.sequence_id).or_default().push(r);
    }
    let mut ok = Vec::with_capacity(by_id.len());
    let mut rejected = Vec::new();
    for group in by_id.values() {
        match sequence_from_records(group) {
            Ok(s) => ok.push(s),
            Err(e) => rejected.push(e),
        }
    }
    (ok, rejected)
}

/// `Σk ⟨σk⟩²`, optionally minus the shot-noise bias of each square.
pub fn purity_point(triple: &ExpectationTriple, bias_correct: bool) -> f64 {
    let raw: f64 = triple.components().iter().map(|v| v * v).sum();
    if bias_correct {
        raw - triple.shot_variance()
    } else {
        raw
    }
}

/// `â = (P₋z|₋z − P₋z|₊z)/2 + ½` from the z record and its flipped twin.
pub fn a_hat(same_target: ShotCounts, flipped_target: ShotCounts) -> f64 {
    0.5 * (same_target.frequency() - flipped_target.frequency()) + 0.5
}

/// Same as [`a_hat`] on raw probabilities.
pub fn a_hat_from_probabilities(p_same: f64, p_flipped: f64) -> f64 {
    0.5 * (p_same - p_flipped) + 0.5
}

/// How `b̂` aggregates the per-sequence triples of one length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spread {
    /// Mean over sequences of `Σk ⟨σk⟩²`, fitted without offset.
    #[default]
    SecondMoment,
    /// `Σk` of the sample variance over sequences of `⟨σk⟩`.
    Variance,
}

/// `b̂` for one sequence length.
pub fn b_hat(triples: &[ExpectationTriple], spread: Spread, bias_correct: bool) -> Result<f64> {
    match spread {
        Spread::SecondMoment => {
            if triples.is_empty() {
                return Err(Error::InsufficientData("b_hat needs at least one sequence".into()));
            }
            Ok(mean(&triples.iter().map(|t| purity_point(t, bias_correct)).collect::<Vec<_>>()))
        }
        Spread::Variance => {
            if triples.len() < 2 {
                return Err(Error::InsufficientData("b_hat variance needs n >= 2 sequences".into()));
            }
            let total: f64 = (0..3)
                .map(|k| sample_variance(&triples.iter().map(|t| t.components()[k]).collect::<Vec<_>>()))
                .sum();
            let noise = if bias_correct { mean(&triples.iter().map(|t| t.shot_variance()).collect::<Vec<_>>()) } else { 0.0 };
            Ok(total - noise)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    #[default]
    OffsetEliminated,
    WithOffset,
}

impl Pipeline {
    pub fn models(self) -> (DecayModel, DecayModel) {
        match self {
            Pipeline::OffsetEliminated => (DecayModel::AHatFixedHalf, DecayModel::BHatZeroOffset),
            Pipeline::WithOffset => (DecayModel::PWithOffset, DecayModel::PurityWithOffset),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorOptions {
    #[serde(default)]
    pub pipeline: Pipeline,
    #[serde(default = "default_true")]
    pub bias_correct: bool,
    #[serde(default)]
    pub spread: Spread,
    /// Model the purity accumulated from relaxation in the offset-free `b̂`
    /// fit, with the shift measured from the paired z records.
    #[serde(default = "default_true")]
    pub relaxation_correction: bool,
    /// Zero disables the bootstrap; intervals then come from the delta method.
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            pipeline: Pipeline::default(),
            bias_correct: true,
            spread: Spread::default(),
            relaxation_correction: true,
            bootstrap_resamples: DEFAULT_RESAMPLES,
        }
    }
}

/// Sequences of one window, one stratum per length in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowData {
    pub strata: Vec<Vec<SequenceData>>,
}

impl WindowData {
    pub fn from_sequences(sequences: impl IntoIterator<Item = SequenceData>) -> Self {
        let mut by_m: BTreeMap<u32, Vec<SequenceData>> = BTreeMap::new();
        for s in sequences {
            by_m.entry(s.m).or_default().push(s);
        }
        Self { strata: by_m.into_values().collect() }
    }

    pub fn min_sequences(&self) -> usize {
        self.strata.iter().map(Vec::len).min().unwrap_or(0)
    }
}

fn per_sequence_values(stratum: &[SequenceData], model: DecayModel, bias_correct: bool, shift: f64) -> Option<Vec<f64>> {
    stratum
        .iter()
        .map(|s| match model {
            DecayModel::AHatFixedHalf => s.z_flip.map(|f| a_hat(s.z, f)),
            DecayModel::PWithOffset => Some(s.z.frequency()),
            DecayModel::PurityWithOffset => Some(purity_point(&s.triple(), bias_correct)),
            DecayModel::BHatZeroOffset => Some(purity_point(&s.triple().shifted(shift), bias_correct)),
        })
        .collect()
}

/// Per-length points for `model`, weighted by the inverse variance of the
/// per-length mean when every length has enough sequences and scatter.
/// `shift` is subtracted from every readout before zero-offset purities are
/// formed.
pub fn decay_points(
    strata: &[Vec<SequenceData>],
    model: DecayModel,
    opts: &EstimatorOptions,
    shift: f64,
) -> std::result::Result<(Vec<DecayPoint>, Weighting), FitError> {
    let mut points = Vec::with_capacity(strata.len());
    let mut weighted = true;
    for stratum in strata {
        let Some(first) = stratum.first() else { continue };
        let m = first.m as f64;
        if model == DecayModel::BHatZeroOffset && opts.spread == Spread::Variance {
            let triples: Vec<_> = stratum.iter().map(SequenceData::triple).collect();
            let value = b_hat(&triples, Spread::Variance, opts.bias_correct).map_err(|_| FitError::InvalidInput)?;
            points.push(DecayPoint::new(m, value));
            weighted = false;
            continue;
        }
        let values = per_sequence_values(stratum, model, opts.bias_correct, shift).ok_or(FitError::InvalidInput)?;
        let var = sample_variance(&values);
        let n = values.len();
        if n < MIN_SEQUENCES_FOR_WEIGHTS || !(var > 0.0) {
            weighted = false;
        }
        points.push(DecayPoint { m, value: mean(&values), weight: if var > 0.0 { n as f64 / var } else { 1.0 } });
    }
    let weighting = if weighted { Weighting::InverseVariance } else { Weighting::Unweighted };
    if !weighted {
        points.iter_mut().for_each(|p| p.weight = 1.0);
    }
    Ok((points, weighting))
}

/// Readout shift `t` added by the relaxation that follows the last gate, and
/// an unbiased estimate of `t²`. The z and z_flip targets are opposite, so
/// the mean of their expectations is the shift alone. `None` without paired
/// records.
pub fn relaxation_shift(strata: &[Vec<SequenceData>]) -> Option<(f64, f64)> {
    let shifts: Vec<f64> = strata
        .iter()
        .flatten()
        .filter_map(|s| s.z_flip.map(|f| 0.5 * (s.z.expectation() + f.expectation())))
        .collect();
    if shifts.len() < 2 {
        return None;
    }
    let t = mean(&shifts);
    Some((t, t * t - sample_variance(&shifts) / shifts.len() as f64))
}

/// The survival-decay fit and the purity-decay fit of one window.
///
/// Relaxation displaces every readout by the same `t`, and each gate adds
/// `t²` to the purity of the state it acts on. With the correction enabled,
/// zero-offset purities are formed from shifted readouts and the purity
/// model carries the accumulated `t²` term.
pub fn fit_window(strata: &[Vec<SequenceData>], opts: &EstimatorOptions) -> std::result::Result<(DecayFit, DecayFit), FitError> {
    let (p_model, u_model) = opts.pipeline.models();
    let (shift, accumulation) = if u_model == DecayModel::BHatZeroOffset
        && opts.spread == Spread::SecondMoment
        && opts.relaxation_correction
    {
        relaxation_shift(strata).unwrap_or((0.0, 0.0))
    } else {
        (0.0, 0.0)
    };
    let (pp, pw) = decay_points(strata, p_model, opts, 0.0)?;
    let (up, uw) = decay_points(strata, u_model, opts, shift)?;
    Ok((fit_decay(&pp, p_model, pw)?, fit_decay_accumulating(&up, u_model, uw, accumulation)?))
}

/// `(ε, ε_inc, ε_coh)` for given decay rates.
pub fn error_rates(p: f64, u: f64) -> [f64; 3] {
    let eps = 0.5 * (1.0 - p);
    let inc = 0.5 * (1.0 - u.sqrt());
    [eps, inc, eps - inc]
}

/// `((D+1)/D·ε, √(D(D+1)ε))`, bracketing half the diamond distance.
pub fn diamond_bounds(epsilon: f64, dimension: u32) -> (f64, f64) {
    let d = dimension as f64;
    ((d + 1.0) / d * epsilon, (d * (d + 1.0) * epsilon).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Consistency {
    Consistent,
    /// A fitted rate lies above 1 by more than the fixed slack, though within
    /// its statistical tolerance.
    RateAboveOne,
    /// `ε_coh` is below zero by more than three standard deviations.
    NegativeCoherent,
}

impl Consistency {
    pub fn as_str(self) -> &'static str {
        match self {
            Consistency::Consistent => "ok",
            Consistency::RateAboveOne => "rate_above_one",
            Consistency::NegativeCoherent => "negative_coherent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Bootstrap,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub epsilon: f64,
    pub epsilon_inc: f64,
    pub epsilon_coh: f64,
    pub p: f64,
    pub u: f64,
    /// 68% intervals for (ε, ε_inc, ε_coh).
    pub ci: [Interval; 3],
    /// 68% intervals for (p, u).
    pub rate_ci: [Interval; 2],
    pub ci_method: CiMethod,
    /// First-order standard deviations for (ε, ε_inc, ε_coh).
    pub delta_sigma: [f64; 3],
    pub diamond_lower: f64,
    pub diamond_upper: f64,
    pub consistency: Consistency,
    pub low_confidence: bool,
}

impl ErrorBudget {
    pub fn values(&self) -> [f64; 3] {
        [self.epsilon, self.epsilon_inc, self.epsilon_coh]
    }

    /// Half-widths of the reported intervals, used as 1σ.
    pub fn sigma(&self) -> [f64; 3] {
        [self.ci[0].half_width(), self.ci[1].half_width(), self.ci[2].half_width()]
    }
}

/// Budget from a survival fit and a purity fit with delta-method intervals.
/// ε_coh's interval treats the two fits as independent.
pub fn budget_from_fits(p_fit: &DecayFit, u_fit: &DecayFit) -> ErrorBudget {
    let (p, u) = (p_fit.rate, u_fit.rate);
    let [eps, inc, coh] = error_rates(p, u);
    let s_eps = 0.5 * p_fit.rate_se;
    let s_inc = u_fit.rate_se / (4.0 * u.sqrt());
    let s_coh = s_eps.hypot(s_inc);
    let (diamond_lower, diamond_upper) = diamond_bounds(eps.max(0.0), 2);
    let mut budget = ErrorBudget {
        epsilon: eps,
        epsilon_inc: inc,
        epsilon_coh: coh,
        p,
        u,
        ci: [Interval::around(eps, s_eps), Interval::around(inc, s_inc), Interval::around(coh, s_coh)],
        rate_ci: [Interval::around(p, p_fit.rate_se), Interval::around(u, u_fit.rate_se)],
        ci_method: CiMethod::Delta,
        delta_sigma: [s_eps, s_inc, s_coh],
        diamond_lower,
        diamond_upper,
        consistency: Consistency::Consistent,
        low_confidence: false,
    };
    budget.consistency = consistency_of(&budget);
    budget
}

fn consistency_of(b: &ErrorBudget) -> Consistency {
    if b.epsilon_coh < -3.0 * b.sigma()[2] {
        Consistency::NegativeCoherent
    } else if b.u > 1.0 + RATE_SLACK || b.p > 1.0 + RATE_SLACK {
        Consistency::RateAboveOne
    } else {
        Consistency::Consistent
    }
}

/// Full window estimate: point fits, then bootstrap intervals over whole
/// sequences when enabled. `key` selects the bootstrap streams.
pub fn estimate_window(
    data: &WindowData,
    opts: &EstimatorOptions,
    seed: u64,
    key: &[u64],
) -> std::result::Result<ErrorBudget, FitError> {
    let (p_fit, u_fit) = fit_window(&data.strata, opts)?;
    let mut budget = budget_from_fits(&p_fit, &u_fit);
    if opts.bootstrap_resamples > 0 {
        let stat = |strata: &[Vec<SequenceData>]| {
            fit_window(strata, opts).ok().map(|(pf, uf)| {
                let [e, i, c] = error_rates(pf.rate, uf.rate);
                [e, i, c, pf.rate, uf.rate]
            })
        };
        if let Some(boot) = bootstrap_ci(&data.strata, stat, opts.bootstrap_resamples, seed, key) {
            let [e, i, c, p, u] = boot.intervals;
            budget.ci = [e, i, c];
            budget.rate_ci = [p, u];
            budget.ci_method = CiMethod::Bootstrap;
            budget.low_confidence = boot.low_confidence;
        } else {
            budget.low_confidence = true;
        }
    }
    if data.min_sequences() < crate::bootstrap::MIN_UNITS {
        budget.low_confidence = true;
    }
    budget.consistency = consistency_of(&budget);
    Ok(budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(variant: Variant, shots: u32, ones: u32) -> MeasurementRecord {
        MeasurementRecord { cycle: 0, wall_time: 0.0, point: "q".into(), m: 2, variant, shots, ones, sequence_id: 7 }
    }

    fn sc(shots: u32, ones: u32) -> ShotCounts {
        ShotCounts::new(shots, ones).unwrap()
    }

    #[test]
    fn expectation_examples() {
        let rs = [rec(Variant::Z, 1000, 1000), rec(Variant::X, 1000, 500), rec(Variant::Y, 1000, 900)];
        let refs: Vec<_> = rs.iter().collect();
        let t = expectations_from_records(&refs).unwrap();
        assert_eq!((t.z, t.x), (1.0, 0.0));
        assert!((t.y - 0.8).abs() < 1e-15);
    }

    #[test]
    fn missing_variant_is_rejected() {
        let rs = [rec(Variant::Z, 10, 10), rec(Variant::X, 10, 5)];
        let refs: Vec<_> = rs.iter().collect();
        let err = expectations_from_records(&refs).unwrap_err();
        assert!(err.to_string().contains("missing y"), "{err}");
        let (ok, bad) = group_sequences(rs.iter());
        assert!(ok.is_empty() && bad.len() == 1);
    }

    #[test]
    fn purity_point_examples() {
        let exact = |x: f64, y: f64, z: f64| ExpectationTriple { x, y, z, counts: [sc(1000, 500); 3] };
        assert_eq!(purity_point(&exact(1.0, 0.0, 0.0), false), 1.0);
        assert!((purity_point(&exact(0.3, 0.4, 0.0), false) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn a_hat_examples() {
        assert!((a_hat_from_probabilities(0.9, 0.1) - 0.9).abs() < 1e-15);
        assert_eq!(a_hat_from_probabilities(0.5, 0.5), 0.5);
        assert_eq!(a_hat(sc(100, 100), sc(100, 0)), 1.0);
    }

    #[test]
    fn b_hat_variance_examples() {
        let t = ExpectationTriple::from_counts(sc(100, 70), sc(100, 40), sc(100, 90));
        assert!(b_hat(&[t; 6], Spread::Variance, false).unwrap().abs() < 1e-28);
        let n = 10;
        let plus = ExpectationTriple::from_counts(sc(100, 100), sc(100, 50), sc(100, 50));
        let minus = ExpectationTriple::from_counts(sc(100, 0), sc(100, 50), sc(100, 50));
        let mix: Vec<_> = (0..n).map(|i| if i % 2 == 0 { plus } else { minus }).collect();
        let v = b_hat(&mix, Spread::Variance, false).unwrap();
        assert!((v - n as f64 / (n - 1) as f64).abs() < 1e-12);
        assert!(b_hat(&[t], Spread::Variance, false).is_err());
    }

    #[test]
    fn diamond_examples() {
        assert_eq!(diamond_bounds(0.0, 2), (0.0, 0.0));
        let (lo, hi) = diamond_bounds(3.61e-3, 2);
        assert!((lo - 5.415e-3).abs() < 1e-12);
        // √0.02166 = 0.147173; the quoted 0.14718 agrees to one unit in the last digit.
        assert!((hi - 0.14718).abs() < 1e-5);
        let (lo2, hi2) = diamond_bounds(3.62e-3, 2);
        assert!(lo2 > lo && hi2 > hi);
    }

    fn fit(model: DecayModel, rate: f64, se: f64) -> DecayFit {
        DecayFit {
            accumulation: 0.0,
            model,
            amplitude: 0.5,
            rate,
            offset: None,
            amplitude_se: 0.0,
            rate_se: se,
            offset_se: None,
            residual: 0.0,
            iterations: 1,
        }
    }

    #[test]
    fn budget_examples() {
        let b = budget_from_fits(&fit(DecayModel::AHatFixedHalf, 1.0, 0.0), &fit(DecayModel::BHatZeroOffset, 1.0, 0.0));
        assert_eq!(b.values(), [0.0, 0.0, 0.0]);
        let p0 = 0.993;
        let b = budget_from_fits(&fit(DecayModel::AHatFixedHalf, p0, 1e-4), &fit(DecayModel::BHatZeroOffset, p0 * p0, 1e-4));
        assert!((b.epsilon - b.epsilon_inc).abs() < 1e-15 && b.epsilon_coh.abs() < 1e-15);
        assert_eq!(b.epsilon, b.epsilon_inc + b.epsilon_coh);
        // Reference magnitudes: ε = 3.61e-3 with ε_inc = 2.36e-3.
        let p = 1.0 - 2.0 * 3.61e-3;
        let u = (1.0 - 2.0 * 2.36e-3f64).powi(2);
        let b = budget_from_fits(&fit(DecayModel::AHatFixedHalf, p, 1e-5), &fit(DecayModel::BHatZeroOffset, u, 1e-5));
        assert!((b.epsilon_coh - 1.25e-3).abs() < 1e-12);
        assert!(b.diamond_lower <= b.diamond_upper);
    }

    #[test]
    fn budget_flags() {
        let b = budget_from_fits(&fit(DecayModel::AHatFixedHalf, 0.999, 1e-6), &fit(DecayModel::BHatZeroOffset, 0.99, 1e-6));
        assert_eq!(b.consistency, Consistency::NegativeCoherent);
        let b = budget_from_fits(&fit(DecayModel::AHatFixedHalf, 0.99, 1e-3), &fit(DecayModel::BHatZeroOffset, 1.0 + 1e-5, 1e-4));
        assert_eq!(b.consistency, Consistency::RateAboveOne);
        assert!(b.epsilon_inc < 0.0, "reported, not clipped");
    }
}
