//! PB sequence generation and simulated execution.
//!
//! A cycle runs one PB sequence per operating point. A PB sequence holds one
//! random Clifford list per sequence length, executed four times with
//! different compiled inverses: measuring along z, x, y, and along z with
//! the target flipped. The qubit is prepared in the ground state at `-z` and
//! every record counts outcomes that project back onto that state.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{apply_map, sample_counts, survival_probability, BlochVector, PauliTransferMap, ShotCounts};
use crate::clifford::{sample_uniform, Basis, CliffordElement, GateSequence, GROUP_ORDER};
use crate::error::{Error, Result};
use crate::fit::{fit_decay, DecayModel, DecayPoint, Weighting};
use crate::noise::{gate_channel, t1_effective, ScenarioConfig, ScenarioSnapshot};
use crate::rng::{stream, Domain};

/// Sequence lengths used when a plan does not list its own.
pub const DEFAULT_LENGTHS: [u32; 7] = [2, 6, 13, 25, 50, 100, 200];
pub const DEFAULT_SHOTS: u32 = 1000;
pub const DEFAULT_T1_SHOTS: u32 = 500;
pub const DEFAULT_T1_DELAYS: usize = 8;

/// Prepared state and measurement target.
pub fn ground_axis() -> Vector3<f64> {
    -Vector3::z()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Z,
    X,
    Y,
    ZFlip,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Z, Variant::X, Variant::Y, Variant::ZFlip];

    pub fn basis(self) -> Basis {
        match self {
            Variant::Z | Variant::ZFlip => Basis::Z,
            Variant::X => Basis::X,
            Variant::Y => Basis::Y,
        }
    }

    pub fn flip(self) -> bool {
        self == Variant::ZFlip
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Z => "z",
            Variant::X => "x",
            Variant::Y => "y",
            Variant::ZFlip => "z_flip",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.as_str() == s)
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct T1ScanPlan {
    /// Frequencies in GHz.
    pub frequencies: Vec<f64>,
    /// Delays in seconds. Defaults to 8 log-spaced points from the gate time
    /// to 3·t1_base.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays: Option<Vec<f64>>,
    #[serde(default = "default_t1_shots")]
    pub shots: u32,
    /// Scan every this many cycles.
    #[serde(default = "one")]
    pub every: u32,
}

fn default_t1_shots() -> u32 {
    DEFAULT_T1_SHOTS
}

fn one() -> u32 {
    1
}

fn default_lengths() -> Vec<u32> {
    DEFAULT_LENGTHS.to_vec()
}

fn default_shots() -> u32 {
    DEFAULT_SHOTS
}

fn default_repetition_time() -> f64 {
    100e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default = "default_lengths")]
    pub lengths: Vec<u32>,
    pub cycles: u32,
    #[serde(default = "default_shots")]
    pub shots_per_variant: u32,
    /// Hours between cycle starts.
    pub cycle_period: f64,
    /// Labels of the scenario's operating points to run, in order. Empty
    /// means all of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<String>,
    /// Readout and reset time per shot, seconds.
    #[serde(default = "default_repetition_time")]
    pub repetition_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_scan: Option<T1ScanPlan>,
}

impl ExperimentPlan {
    pub fn new(cycles: u32, cycle_period: f64) -> Self {
        Self {
            lengths: default_lengths(),
            cycles,
            shots_per_variant: DEFAULT_SHOTS,
            cycle_period,
            points: Vec::new(),
            repetition_time: default_repetition_time(),
            t1_scan: None,
        }
    }

    /// Operating point labels in execution order.
    pub fn point_labels(&self, scenario: &ScenarioConfig) -> Vec<String> {
        if self.points.is_empty() {
            scenario.operating_points.iter().map(|p| p.label.clone()).collect()
        } else {
            self.points.clone()
        }
    }

    /// Seconds of qubit time one cycle needs.
    pub fn busy_time(&self, scenario: &ScenarioConfig) -> f64 {
        let points = self.point_labels(scenario).len() as f64;
        let per_point: f64 = self
            .lengths
            .iter()
            .map(|&m| {
                Variant::ALL.len() as f64
                    * self.shots_per_variant as f64
                    * ((m as f64 + 1.0) * scenario.gate_time + self.repetition_time)
            })
            .sum();
        let t1 = self.t1_scan.as_ref().map_or(0.0, |scan| {
            let delays = scan_delays(scan, scenario);
            scan.frequencies.len() as f64
                * delays.iter().map(|d| scan.shots as f64 * (d + self.repetition_time)).sum::<f64>()
        });
        points * per_point + t1
    }

    pub fn validate(&self, scenario: &ScenarioConfig) -> Result<()> {
        if self.lengths.is_empty() || self.lengths[0] < 1 || self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("lengths must be strictly increasing and >= 1".into()));
        }
        if self.shots_per_variant == 0 {
            return Err(Error::Config("shots_per_variant must be positive".into()));
        }
        if !(self.cycle_period > 0.0 && self.cycle_period.is_finite()) {
            return Err(Error::Config("cycle_period must be positive".into()));
        }
        if !(self.repetition_time >= 0.0) {
            return Err(Error::Config("repetition_time must be >= 0".into()));
        }
        for label in &self.points {
            if scenario.point(label).is_none() {
                return Err(Error::Config(format!("plan point {label} has no operating frequency in the scenario")));
            }
        }
        if let Some(scan) = &self.t1_scan {
            if scan.frequencies.is_empty() || scan.frequencies.iter().any(|f| !(*f > 0.0)) {
                return Err(Error::Config("t1_scan.frequencies must be non-empty and positive".into()));
            }
            if scan.shots == 0 || scan.every == 0 {
                return Err(Error::Config("t1_scan.shots and t1_scan.every must be positive".into()));
            }
            if let Some(d) = &scan.delays {
                if d.len() < 2 || d.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::Config("t1_scan.delays needs at least two positive delays".into()));
                }
            }
        }
        let busy = self.busy_time(scenario);
        if busy > self.cycle_period * 3600.0 {
            return Err(Error::Config(format!(
                "cycle_period {} h is shorter than the {busy:.3} s a cycle takes",
                self.cycle_period
            )));
        }
        Ok(())
    }
}

/// Random gates for one sequence length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSequence {
    pub m: u32,
    pub sequence_id: u64,
    pub gates: Vec<CliffordElement>,
}

impl SubSequence {
    /// The executable sequence for one measurement variant.
    pub fn variant(&self, variant: Variant) -> GateSequence {
        GateSequence::new(self.gates.clone(), variant.basis(), variant.flip())
    }
}

/// One sub-sequence per length; all variants share each gate list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PbSequence {
    pub sub_sequences: Vec<SubSequence>,
}

/// Draws a PB sequence with fresh gates per length. `first_id` numbers the
/// sub-sequences consecutively.
pub fn build_pb_sequence<R: rand::Rng + ?Sized>(lengths: &[u32], first_id: u64, rng: &mut R) -> PbSequence {
    PbSequence {
        sub_sequences: lengths
            .iter()
            .enumerate()
            .map(|(i, &m)| SubSequence { m, sequence_id: first_id + i as u64, gates: sample_uniform(rng, m as usize) })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub cycle: u32,
    /// Hours.
    pub wall_time: f64,
    pub point: String,
    pub m: u32,
    pub variant: Variant,
    pub shots: u32,
    pub ones: u32,
    pub sequence_id: u64,
}

/// Each Clifford followed by the gate channel, precomposed.
pub struct NoisyGateSet {
    maps: Vec<PauliTransferMap>,
}

impl NoisyGateSet {
    pub fn new(channel: &PauliTransferMap) -> Self {
        let maps = (0..GROUP_ORDER)
            .map(|i| {
                let g = CliffordElement::from_index(i).unwrap();
                PauliTransferMap::unitary(&g.matrix()).then(channel)
            })
            .collect();
        Self { maps }
    }

    fn apply(&self, g: CliffordElement, state: &BlochVector) -> Result<BlochVector> {
        apply_map(&self.maps[g.index()], state)
    }

    /// Runs `gates` from `state`.
    pub fn run(&self, gates: &[CliffordElement], state: BlochVector) -> Result<BlochVector> {
        gates.iter().try_fold(state, |s, &g| self.apply(g, &s))
    }
}

/// Final Bloch vector of a sequence started in the ground state, with the
/// channel after every gate including the inverse.
pub fn final_state(seq: &GateSequence, channel: &PauliTransferMap) -> Result<BlochVector> {
    NoisyGateSet::new(channel).run(&seq.iter_all().collect::<Vec<_>>(), BlochVector::along(&ground_axis()))
}

/// Executes one sequence and samples the ground-state outcome.
pub fn execute_sequence<R: rand::Rng + ?Sized>(
    seq: &GateSequence,
    channel: &PauliTransferMap,
    shots: u32,
    rng: &mut R,
) -> Result<ShotCounts> {
    let state = final_state(seq, channel)?;
    sample_counts(survival_probability(&state, &ground_axis()), shots, rng)
}

/// Ground-state probabilities of all four variants of a sub-sequence. The
/// random prefix is simulated once.
pub fn variant_probabilities(sub: &SubSequence, gates: &NoisyGateSet) -> Result<[f64; 4]> {
    let prefix = gates.run(&sub.gates, BlochVector::along(&ground_axis()))?;
    let mut out = [0.0; 4];
    for (slot, v) in out.iter_mut().zip(Variant::ALL) {
        let inv = crate::clifford::compile_inverse(&sub.gates, v.basis(), v.flip());
        let state = gates.apply(inv, &prefix)?;
        *slot = survival_probability(&state, &ground_axis());
    }
    Ok(out)
}

/// One fitted point of a T1 scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Sample {
    pub cycle: u32,
    /// Hours.
    pub wall_time: f64,
    /// GHz.
    pub frequency: f64,
    /// Seconds; `None` when the fit failed.
    pub t1: Option<f64>,
}

fn scan_delays(scan: &T1ScanPlan, scenario: &ScenarioConfig) -> Vec<f64> {
    scan.delays.clone().unwrap_or_else(|| {
        let t1 = scenario.t1_base.seconds().unwrap_or(5e-6);
        log_spaced(scenario.gate_time, 3.0 * t1, DEFAULT_T1_DELAYS)
    })
}

pub fn log_spaced(start: f64, stop: f64, n: usize) -> Vec<f64> {
    let (a, b) = (start.ln(), stop.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Fits `P(t) = A·exp(−t/T1)` to excited-state survival data.
pub fn fit_t1(delays: &[f64], survival: &[f64]) -> Option<f64> {
    const UNIT: f64 = 1e-6;
    let points: Vec<_> = delays.iter().zip(survival).map(|(&t, &p)| DecayPoint::new(t / UNIT, p)).collect();
    let fit = fit_decay(&points, DecayModel::BHatZeroOffset, Weighting::Unweighted).ok()?;
    (fit.rate < 1.0).then(|| -UNIT / fit.rate.ln())
}

/// Samples an excited-state decay at every frequency and fits T1. With
/// `shots = None` the exact probabilities are fitted.
pub fn t1_scan(
    frequencies: &[f64],
    delays: &[f64],
    shots: Option<u32>,
    scenario: &ScenarioConfig,
    snapshot: &ScenarioSnapshot,
    seed: u64,
    cycle: u32,
) -> Result<Vec<T1Sample>> {
    if frequencies.is_empty() || delays.is_empty() {
        return Err(Error::InvalidArgument("T1 scan grid must be non-empty".into()));
    }
    frequencies
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let t1 = t1_effective(f, scenario, snapshot);
            let exact: Vec<f64> = delays.iter().map(|&t| (-t / t1).exp()).collect();
            let observed = match shots {
                None => exact,
                Some(n) => {
                    let mut rng = stream(seed, Domain::T1Scan, &[cycle as u64, i as u64]);
                    exact
                        .iter()
                        .map(|&p| sample_counts(p, n, &mut rng).map(|c| c.frequency()))
                        .collect::<Result<_>>()?
                }
            };
            Ok(T1Sample { cycle, wall_time: snapshot.wall_time, frequency: f, t1: fit_t1(delays, &observed) })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub records: Vec<MeasurementRecord>,
    pub t1: Vec<T1Sample>,
}

/// Simulates the full plan. Scenario state advances once per cycle; the
/// sequences of a cycle run in parallel on independent streams and are
/// merged in (point, length, variant) order.
pub fn run_cycles(plan: &ExperimentPlan, scenario: &ScenarioConfig, seed: u64) -> Result<RunOutput> {
    scenario.validate()?;
    plan.validate(scenario)?;
    let labels = plan.point_labels(scenario);
    let frequencies: Vec<f64> = labels.iter().map(|l| scenario.point(l).unwrap().frequency).collect();
    let n_points = labels.len() as u64;
    let n_lengths = plan.lengths.len() as u64;

    let mut snapshot = ScenarioSnapshot::initial(scenario);
    let mut out = RunOutput::default();
    for cycle in 0..plan.cycles {
        let wall_time = cycle as f64 * plan.cycle_period;
        snapshot.advance_to(scenario, wall_time, &mut stream(seed, Domain::Scenario, &[cycle as u64]));

        let per_point: Vec<Vec<MeasurementRecord>> = (0..labels.len())
            .into_par_iter()
            .map(|pi| {
                let gates = NoisyGateSet::new(&gate_channel(scenario, frequencies[pi], &snapshot));
                let first_id = (cycle as u64 * n_points + pi as u64) * n_lengths;
                let subs: Vec<SubSequence> = plan
                    .lengths
                    .iter()
                    .enumerate()
                    .map(|(li, &m)| {
                        let mut rng = stream(seed, Domain::Gates, &[cycle as u64, pi as u64, li as u64]);
                        SubSequence { m, sequence_id: first_id + li as u64, gates: sample_uniform(&mut rng, m as usize) }
                    })
                    .collect();
                let mut records = Vec::with_capacity(subs.len() * 4);
                for (li, sub) in subs.iter().enumerate() {
                    let probs = variant_probabilities(sub, &gates)?;
                    for (v, p) in Variant::ALL.into_iter().zip(probs) {
                        let mut rng =
                            stream(seed, Domain::Shots, &[cycle as u64, pi as u64, li as u64, v.index()]);
                        let counts = sample_counts(p, plan.shots_per_variant, &mut rng)?;
                        records.push(MeasurementRecord {
                            cycle,
                            wall_time,
                            point: labels[pi].clone(),
                            m: sub.m,
                            variant: v,
                            shots: counts.shots,
                            ones: counts.ones,
                            sequence_id: sub.sequence_id,
                        });
                    }
                }
                Ok(records)
            })
            .collect::<Result<_>>()?;
        out.records.extend(per_point.into_iter().flatten());

        if let Some(scan) = &plan.t1_scan {
            if cycle % scan.every == 0 {
                let delays = scan_delays(scan, scenario);
                out.t1.extend(t1_scan(&scan.frequencies, &delays, Some(scan.shots), scenario, &snapshot, seed, cycle)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{TelegraphParams, TimeConstant, TlsParams};

    fn depolarizing(p: f64) -> ScenarioConfig {
        let mut s = ScenarioConfig::noiseless("q", 5.0);
        s.depolarizing = Some(p);
        s
    }

    #[test]
    fn sub_sequence_structure() {
        let mut rng = stream(1, Domain::Aux, &[]);
        let pb = build_pb_sequence(&[2], 0, &mut rng);
        assert_eq!(pb.sub_sequences.len(), 1);
        let sub = &pb.sub_sequences[0];
        assert_eq!(sub.gates.len(), 2);
        for v in Variant::ALL {
            let seq = sub.variant(v);
            assert_eq!(seq.iter_all().count(), 3);
            assert_eq!(seq.gates, sub.gates);
        }
        let pb = build_pb_sequence(&DEFAULT_LENGTHS, 0, &mut rng);
        assert_eq!(pb.sub_sequences.len(), 7);
    }

    #[test]
    fn noiseless_execution() {
        let mut rng = stream(2, Domain::Aux, &[]);
        let pb = build_pb_sequence(&DEFAULT_LENGTHS, 0, &mut rng);
        let id = PauliTransferMap::identity();
        for sub in &pb.sub_sequences {
            assert_eq!(execute_sequence(&sub.variant(Variant::Z), &id, 100, &mut rng).unwrap().ones, 100);
            assert_eq!(execute_sequence(&sub.variant(Variant::ZFlip), &id, 100, &mut rng).unwrap().ones, 0);
            let gates = NoisyGateSet::new(&id);
            let p = variant_probabilities(sub, &gates).unwrap();
            assert_eq!(p, [1.0, 0.5, 0.5, 0.0]);
        }
    }

    #[test]
    fn depolarizing_survival_matches_composition() {
        let p = 0.98;
        let channel = PauliTransferMap::depolarizing(p);
        let mut rng = stream(3, Domain::Aux, &[]);
        for m in [0u32, 1, 5, 40] {
            let gates = sample_uniform(&mut rng, m as usize);
            let state = final_state(&GateSequence::new(gates, Basis::Z, false), &channel).unwrap();
            let expected = 0.5 + 0.5 * p.powi(m as i32 + 1);
            assert!((survival_probability(&state, &ground_axis()) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_error_keeps_states_pure() {
        let channel = PauliTransferMap::rotation(&Vector3::x(), 0.05);
        let mut rng = stream(4, Domain::Aux, &[]);
        for _ in 0..20 {
            let gates = sample_uniform(&mut rng, 60);
            let state = final_state(&GateSequence::new(gates, Basis::X, false), &channel).unwrap();
            assert!(state.is_pure());
        }
    }

    #[test]
    fn record_count_and_pairing() {
        let mut scenario = depolarizing(0.99);
        scenario.operating_points.push(crate::noise::OperatingPoint { label: "r".into(), frequency: 5.1 });
        let plan = ExperimentPlan::new(30, 0.1);
        let out = run_cycles(&plan, &scenario, 5).unwrap();
        assert_eq!(out.records.len(), 30 * 7 * 4 * 2);
        for chunk in out.records.chunks(4) {
            assert!(chunk.iter().all(|r| r.sequence_id == chunk[0].sequence_id && r.m == chunk[0].m));
            let vs: Vec<_> = chunk.iter().map(|r| r.variant).collect();
            assert_eq!(vs, Variant::ALL);
        }
        let mut times: Vec<f64> = out.records.iter().map(|r| r.wall_time).collect();
        times.dedup();
        for w in times.windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let plan = ExperimentPlan::new(5, 0.1);
        let s = depolarizing(0.99);
        assert_eq!(run_cycles(&plan, &s, 9).unwrap(), run_cycles(&plan, &s, 9).unwrap());
        assert_ne!(run_cycles(&plan, &s, 9).unwrap(), run_cycles(&plan, &s, 10).unwrap());
    }

    #[test]
    fn noiseless_records() {
        let plan = ExperimentPlan::new(3, 0.1);
        let out = run_cycles(&plan, &ScenarioConfig::noiseless("q", 5.0), 1).unwrap();
        for r in &out.records {
            match r.variant {
                Variant::Z => assert_eq!(r.ones, r.shots),
                Variant::ZFlip => assert_eq!(r.ones, 0),
                _ => {}
            }
        }
    }

    #[test]
    fn plan_validation() {
        let s = ScenarioConfig::noiseless("q", 5.0);
        let mut plan = ExperimentPlan::new(1, 0.1);
        plan.points = vec!["missing".into()];
        assert!(matches!(run_cycles(&plan, &s, 1), Err(Error::Config(_))));
        let mut plan = ExperimentPlan::new(1, 0.1);
        plan.lengths = vec![2, 2];
        assert!(plan.validate(&s).is_err());
        let mut plan = ExperimentPlan::new(1, 1e-5);
        plan.lengths = vec![2, 6];
        assert!(plan.validate(&s).is_err(), "period shorter than busy time");
    }

    #[test]
    fn exact_t1_fit() {
        let mut s = ScenarioConfig::noiseless("q", 5.0);
        s.t1_base = TimeConstant::Seconds(5e-6);
        let snap = ScenarioSnapshot::initial(&s);
        let delays = log_spaced(s.gate_time, 15e-6, 8);
        let out = t1_scan(&[5.0], &delays, None, &s, &snap, 0, 0).unwrap();
        let t1 = out[0].t1.unwrap();
        assert!((t1 / 5e-6 - 1.0).abs() < 0.01, "{t1}");
    }

    #[test]
    fn t1_dip_follows_telegraph() {
        let mut s = ScenarioConfig::noiseless("q", 4.61);
        s.t1_base = TimeConstant::Seconds(5e-6);
        s.tls = Some(TlsParams {
            f_center: 4.616,
            linewidth: 0.0005,
            gamma_peak: 5e5,
            coherent_pull: 0.0,
            telegraph: Some(TelegraphParams {
                rate_up: 0.0,
                rate_down: 0.0,
                frequency_shift: -0.002,
                initial_level: 0,
                scheduled_flips: vec![],
            }),
        });
        let grid: Vec<f64> = (0..21).map(|i| 4.610 + 0.0005 * i as f64).collect();
        let delays = log_spaced(s.gate_time, 15e-6, 8);
        let argmin = |samples: &[T1Sample]| {
            samples.iter().min_by(|a, b| a.t1.unwrap().total_cmp(&b.t1.unwrap())).unwrap().frequency
        };
        let mut snap = ScenarioSnapshot::initial(&s);
        let before = argmin(&t1_scan(&grid, &delays, None, &s, &snap, 0, 0).unwrap());
        snap.telegraph.level = 1;
        let after = argmin(&t1_scan(&grid, &delays, None, &s, &snap, 0, 0).unwrap());
        assert!((before - 4.616).abs() < 1e-9);
        assert!((after - before + 0.002).abs() < 1e-9);
    }

    #[test]
    fn missing_t1_when_flat() {
        // No relaxation: flat data is degenerate and yields a gap.
        assert_eq!(fit_t1(&[1e-6, 2e-6, 3e-6], &[1.0, 1.0, 1.0]), None);
    }
}
