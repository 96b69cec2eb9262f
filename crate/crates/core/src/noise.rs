//! Time-dependent noise environment.
//!
//! A scenario combines baseline relaxation and dephasing, an optional
//! strongly coupled TLS (Lorentzian relaxation dip plus a coherent frequency
//! pull), two-state telegraph switching of the TLS frequency, slow bounded
//! drift, and a fixed miscalibration rotation. Given a frozen
//! [`ScenarioSnapshot`], [`gate_channel`] emits the single channel applied
//! after every Clifford.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bloch::PauliTransferMap;
use crate::error::{Error, Result};

pub const DEFAULT_GATE_TIME: f64 = 25e-9;

fn default_gate_time() -> f64 {
    DEFAULT_GATE_TIME
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disabled {
    Off,
}

/// A decay time in seconds, or `"off"` for no decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeConstant {
    Seconds(f64),
    Disabled(Disabled),
}

impl TimeConstant {
    pub fn seconds(&self) -> Option<f64> {
        match self {
            TimeConstant::Seconds(s) => Some(*s),
            TimeConstant::Disabled(_) => None,
        }
    }

    /// `1/T`, zero when disabled.
    pub fn rate(&self) -> f64 {
        self.seconds().map_or(0.0, |s| 1.0 / s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub label: String,
    /// GHz.
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Miscalibration {
    /// Drive detuning in Hz.
    #[serde(default)]
    pub detuning: f64,
    /// Extra rotation per gate in radians.
    #[serde(default)]
    pub overrotation: f64,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    /// DRAG coefficient of the calibration this scenario represents. Carried
    /// as a label only; it does not enter the channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag: Option<f64>,
}

fn default_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

impl Default for Miscalibration {
    fn default() -> Self {
        Self { detuning: 0.0, overrotation: 0.0, axis: default_axis(), drag: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelegraphParams {
    /// 0 → 1 switching rate, per hour.
    pub rate_up: f64,
    /// 1 → 0 switching rate, per hour.
    pub rate_down: f64,
    /// Shift of the TLS frequency while in level 1, GHz.
    pub frequency_shift: f64,
    #[serde(default)]
    pub initial_level: u8,
    /// Deterministic flips at these wall times (hours), on top of the random
    /// switching.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scheduled_flips: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsParams {
    /// GHz.
    pub f_center: f64,
    /// Lorentzian half width, GHz.
    pub linewidth: f64,
    /// Added relaxation rate on resonance, 1/s.
    pub gamma_peak: f64,
    /// Frequency pull in Hz per unit Lorentzian weight, added to the drive
    /// detuning.
    #[serde(default)]
    pub coherent_pull: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub telegraph: Option<TelegraphParams>,
}

/// Reflected Gaussian random walk; `step` is the standard deviation
/// accumulated over one hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomWalk {
    pub step: f64,
    pub lower: f64,
    pub upper: f64,
}

impl RandomWalk {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.step >= 0.0) || !(self.lower <= self.upper) {
            return Err(Error::Config(format!("drift.{name}: need step >= 0 and lower <= upper")));
        }
        Ok(())
    }

    fn advance<R: Rng + ?Sized>(&self, value: f64, dt_hours: f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        reflect(value + self.step * dt_hours.sqrt() * z, self.lower, self.upper)
    }
}

fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    if width <= 0.0 {
        return lo;
    }
    // Fold onto a period of 2·width.
    x = (x - lo).rem_euclid(2.0 * width);
    if x > width {
        x = 2.0 * width - x;
    }
    lo + x
}

/// Offsets that drift once per cycle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    /// Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<RandomWalk>,
    /// Radians per gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrotation: Option<RandomWalk>,
    /// GHz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls_center: Option<RandomWalk>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Baseline T1 in seconds, or "off".
    pub t1_base: TimeConstant,
    /// Pure dephasing time in seconds, or "off". Defaults to `2·t1_base`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tphi_base: Option<TimeConstant>,
    #[serde(default = "default_gate_time")]
    pub gate_time: f64,
    pub operating_points: Vec<OperatingPoint>,
    #[serde(default)]
    pub miscalibration: Miscalibration,
    /// Extra depolarizing factor per gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depolarizing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls: Option<TlsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSpec>,
}

impl ScenarioConfig {
    /// A scenario with every noise source switched off and one point.
    pub fn noiseless(label: &str, frequency: f64) -> Self {
        Self {
            t1_base: TimeConstant::Disabled(Disabled::Off),
            tphi_base: None,
            gate_time: DEFAULT_GATE_TIME,
            operating_points: vec![OperatingPoint { label: label.into(), frequency }],
            miscalibration: Miscalibration::default(),
            depolarizing: None,
            tls: None,
            drift: None,
        }
    }

    /// Effective dephasing time constant after applying the default.
    pub fn tphi(&self) -> TimeConstant {
        match self.tphi_base {
            Some(t) => t,
            None => match self.t1_base {
                TimeConstant::Seconds(t1) => TimeConstant::Seconds(2.0 * t1),
                off => off,
            },
        }
    }

    pub fn point(&self, label: &str) -> Option<&OperatingPoint> {
        self.operating_points.iter().find(|p| p.label == label)
    }

    pub fn telegraph(&self) -> Option<&TelegraphParams> {
        self.tls.as_ref().and_then(|t| t.telegraph.as_ref())
    }

    /// True when the channel can change over wall time.
    pub fn is_time_dependent(&self) -> bool {
        self.telegraph().is_some() || self.drift.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(t1) = self.t1_base.seconds() {
            positive("t1_base", t1)?;
        }
        if let Some(tphi) = self.tphi_base.and_then(|t| t.seconds()) {
            positive("tphi_base", tphi)?;
        }
        positive("gate_time", self.gate_time)?;
        if self.operating_points.is_empty() {
            return Err(Error::Config("at least one operating point is required".into()));
        }
        for (i, p) in self.operating_points.iter().enumerate() {
            if p.label.is_empty() || p.label.contains([',', '\n', '"']) {
                return Err(Error::Config(format!("operating point {i} has an invalid label")));
            }
            positive(&format!("operating_points[{}].frequency", p.label), p.frequency)?;
            if self.operating_points[..i].iter().any(|q| q.label == p.label) {
                return Err(Error::Config(format!("duplicate operating point label {}", p.label)));
            }
        }
        let axis = Vector3::from(self.miscalibration.axis);
        if !(axis.norm() > 0.0) {
            return Err(Error::Config("miscalibration.axis must be non-zero".into()));
        }
        if let Some(d) = self.depolarizing {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::Config("depolarizing must lie in [0, 1]".into()));
            }
        }
        if let Some(tls) = &self.tls {
            positive("tls.f_center", tls.f_center)?;
            positive("tls.linewidth", tls.linewidth)?;
            if !(tls.gamma_peak >= 0.0) {
                return Err(Error::Config("tls.gamma_peak must be >= 0".into()));
            }
            if let Some(tg) = &tls.telegraph {
                if !(tg.rate_up >= 0.0 && tg.rate_down >= 0.0) {
                    return Err(Error::Config("telegraph rates must be >= 0".into()));
                }
                if tg.initial_level > 1 {
                    return Err(Error::Config("telegraph.initial_level must be 0 or 1".into()));
                }
            }
        }
        if let Some(drift) = &self.drift {
            for (name, walk) in [
                ("detuning", &drift.detuning),
                ("overrotation", &drift.overrotation),
                ("tls_center", &drift.tls_center),
            ] {
                if let Some(w) = walk {
                    w.validate(name)?;
                }
            }
        }
        Ok(())
    }
}

/// Hidden two-level switching state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphState {
    pub level: u8,
    /// Hours.
    pub last_switch_time: f64,
}

impl TelegraphState {
    pub fn new(level: u8) -> Self {
        Self { level, last_switch_time: 0.0 }
    }

    fn flip(&mut self, at: f64) {
        self.level ^= 1;
        self.last_switch_time = at;
    }
}

/// Advances the telegraph over `dt` hours ending at `now`. Switches at most
/// once, with probability `1 − exp(−rate·dt)` for the current level's exit
/// rate.
pub fn telegraph_step<R: Rng + ?Sized>(
    state: TelegraphState,
    now: f64,
    dt: f64,
    params: &TelegraphParams,
    rng: &mut R,
) -> TelegraphState {
    debug_assert!(dt > 0.0);
    let rate = if state.level == 0 { params.rate_up } else { params.rate_down };
    let mut next = state;
    if rate > 0.0 && rng.random::<f64>() < -(-rate * dt).exp_m1() {
        next.flip(now);
    }
    next
}

/// Current drift offsets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftState {
    pub detuning: f64,
    pub overrotation: f64,
    pub tls_center: f64,
}

/// Frozen environment for one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSnapshot {
    /// Hours.
    pub wall_time: f64,
    pub telegraph: TelegraphState,
    pub drift: DriftState,
}

impl ScenarioSnapshot {
    pub fn initial(scenario: &ScenarioConfig) -> Self {
        let level = scenario.telegraph().map_or(0, |t| t.initial_level);
        let mut drift = DriftState::default();
        if let Some(spec) = &scenario.drift {
            let start = |w: &Option<RandomWalk>| w.as_ref().map_or(0.0, |w| 0f64.clamp(w.lower, w.upper));
            drift = DriftState {
                detuning: start(&spec.detuning),
                overrotation: start(&spec.overrotation),
                tls_center: start(&spec.tls_center),
            };
        }
        Self { wall_time: 0.0, telegraph: TelegraphState::new(level), drift }
    }

    /// Evolves telegraph and drift to wall time `t` (hours). Scheduled flips
    /// in `(wall_time, t]` are applied after the random step.
    pub fn advance_to<R: Rng + ?Sized>(&mut self, scenario: &ScenarioConfig, t: f64, rng: &mut R) {
        let dt = t - self.wall_time;
        if dt <= 0.0 {
            return;
        }
        if let Some(tg) = scenario.telegraph() {
            self.telegraph = telegraph_step(self.telegraph, t, dt, tg, rng);
            for &at in &tg.scheduled_flips {
                if at > self.wall_time && at <= t {
                    self.telegraph.flip(at);
                }
            }
        }
        if let Some(spec) = &scenario.drift {
            if let Some(w) = &spec.detuning {
                self.drift.detuning = w.advance(self.drift.detuning, dt, rng);
            }
            if let Some(w) = &spec.overrotation {
                self.drift.overrotation = w.advance(self.drift.overrotation, dt, rng);
            }
            if let Some(w) = &spec.tls_center {
                self.drift.tls_center = w.advance(self.drift.tls_center, dt, rng);
            }
        }
        self.wall_time = t;
    }
}

/// Frequency of the TLS in the given state, GHz.
pub fn tls_frequency(tls: &TlsParams, snapshot: &ScenarioSnapshot) -> f64 {
    let shift = tls.telegraph.as_ref().map_or(0.0, |t| t.frequency_shift);
    tls.f_center + snapshot.drift.tls_center + snapshot.telegraph.level as f64 * shift
}

/// Lorentzian weight `κ²/((f − f_eff)² + κ²)` of the TLS at `f`; zero without a TLS.
pub fn lorentzian_weight(f: f64, scenario: &ScenarioConfig, snapshot: &ScenarioSnapshot) -> f64 {
    scenario.tls.as_ref().map_or(0.0, |tls| {
        let k2 = tls.linewidth * tls.linewidth;
        let d = f - tls_frequency(tls, snapshot);
        k2 / (d * d + k2)
    })
}

/// Relaxation rate at `f` in 1/s.
pub fn relaxation_rate(f: f64, scenario: &ScenarioConfig, snapshot: &ScenarioSnapshot) -> f64 {
    let tls = scenario.tls.as_ref().map_or(0.0, |t| t.gamma_peak * lorentzian_weight(f, scenario, snapshot));
    scenario.t1_base.rate() + tls
}

/// `1/T1 = 1/t1_base + Γ_peak·L(f)`; infinite when nothing relaxes the qubit.
pub fn t1_effective(f: f64, scenario: &ScenarioConfig, snapshot: &ScenarioSnapshot) -> f64 {
    1.0 / relaxation_rate(f, scenario, snapshot)
}

/// Coherent rotation angle per gate, radians.
pub fn rotation_angle(f: f64, scenario: &ScenarioConfig, snapshot: &ScenarioSnapshot) -> f64 {
    let pull = scenario.tls.as_ref().map_or(0.0, |t| t.coherent_pull) * lorentzian_weight(f, scenario, snapshot);
    let detuning = scenario.miscalibration.detuning + snapshot.drift.detuning + pull;
    2.0 * PI * detuning * scenario.gate_time + scenario.miscalibration.overrotation + snapshot.drift.overrotation
}

/// Channel applied after every Clifford at frequency `f`:
/// rotation ∘ depolarizing ∘ dephasing ∘ amplitude damping.
pub fn gate_channel(scenario: &ScenarioConfig, f: f64, snapshot: &ScenarioSnapshot) -> PauliTransferMap {
    let tg = scenario.gate_time;
    let gamma = -(-tg * relaxation_rate(f, scenario, snapshot)).exp_m1();
    let lambda = (-tg * scenario.tphi().rate()).exp();
    let mut map = PauliTransferMap::amplitude_damping(gamma).then(&PauliTransferMap::dephasing(lambda));
    if let Some(p) = scenario.depolarizing {
        map = map.then(&PauliTransferMap::depolarizing(p));
    }
    let angle = rotation_angle(f, scenario, snapshot);
    if angle != 0.0 {
        let axis = Vector3::from(scenario.miscalibration.axis);
        map = map.then(&PauliTransferMap::rotation(&axis, angle));
    }
    map
}
