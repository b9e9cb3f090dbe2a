//! Per-ray drive currents: travelling waves, flapping and square-wave gaits,
//! power envelopes, and the firmware's lookup-table quantisation.
//!
//! A ray at position `x` is driven with `I = s·A·sin(kx ± ωt + φ₀)`, `+` for a
//! wave travelling toward decreasing `x` (backward, toward the tail) and `−`
//! for one travelling toward increasing `x` (forward).

use std::f64::consts::{PI, TAU};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{num, Table};
use crate::units::de_si;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Wave travels toward the head: `sin(kx − ωt)`.
    Forward,
    /// Wave travels toward the tail: `sin(kx + ωt)`.
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Backward => 1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Which half-waves of a square drive carry current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SquareMode {
    /// `+A` during the duty fraction, `−A` otherwise.
    Bipolar,
    /// `−A` (pull) during the duty fraction, coil off otherwise.
    PullOnly,
    /// `+A` (push) during the duty fraction, coil off otherwise.
    PushOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Waveform {
    Sine,
    Square { duty: f64, mode: SquareMode },
}

/// How an envelope's "% power" maps to coil current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerSemantics {
    /// Fraction of electrical power; current scales with its square root.
    #[default]
    Electrical,
    /// Fraction of current amplitude.
    Current,
}

impl PowerSemantics {
    pub fn current_scale(self, power_fraction: f64) -> f64 {
        let p = power_fraction.clamp(0.0, 1.0);
        match self {
            PowerSemantics::Electrical => p.sqrt(),
            PowerSemantics::Current => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavePlan {
    #[serde(deserialize_with = "de_si::current")]
    pub current_amplitude: f64,
    #[serde(deserialize_with = "de_si::length")]
    pub wavelength: f64,
    #[serde(deserialize_with = "de_si::frequency")]
    pub frequency: f64,
    pub direction: Direction,
    #[serde(default = "sine")]
    pub waveform: Waveform,
    #[serde(default, deserialize_with = "de_si::angle")]
    pub global_phase: f64,
    #[serde(default)]
    pub power_semantics: PowerSemantics,
}

fn sine() -> Waveform {
    Waveform::Sine
}

impl WavePlan {
    /// Sinusoidal travelling wave with zero global phase.
    pub fn sine(current_amplitude: f64, wavelength: f64, frequency: f64, direction: Direction) -> Self {
        Self {
            current_amplitude,
            wavelength,
            frequency,
            direction,
            waveform: Waveform::Sine,
            global_phase: 0.0,
            power_semantics: PowerSemantics::Electrical,
        }
    }

    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    pub fn omega(&self) -> f64 {
        TAU * self.frequency
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        Self {
            direction,
            ..self.clone()
        }
    }

    /// Violated plan invariants; `max_current` is the robot's drive limit.
    pub fn violations(&self, max_current: f64) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.wavelength > 0.0) {
            v.push("wavelength must be > 0".to_string());
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            v.push("frequency must be > 0".to_string());
        }
        if !(self.current_amplitude >= 0.0) {
            v.push("current_amplitude must be ≥ 0".to_string());
        }
        if self.current_amplitude > max_current * (1.0 + 1e-12) {
            v.push(format!("current_amplitude exceeds drive limit {max_current} A"));
        }
        if let Waveform::Square { duty, .. } = self.waveform {
            if !(duty > 0.0 && duty < 1.0) {
                v.push("duty must be in (0, 1)".to_string());
            }
        }
        if !self.global_phase.is_finite() {
            v.push("global_phase must be finite".to_string());
        }
        v
    }

    pub fn validate(&self, max_current: f64) -> Result<()> {
        let v = self.violations(max_current);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Phase argument `φ ± ωt + φ₀` wrapped to `[0, 2π)`.
    fn argument(&self, t: f64, phase: f64) -> f64 {
        wrap(phase + self.direction.sign() * self.omega() * t + self.global_phase)
    }
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Unit-amplitude waveform at wrapped argument `psi`.
fn unit_value(waveform: Waveform, psi: f64) -> f64 {
    match waveform {
        Waveform::Sine => psi.sin(),
        Waveform::Square { duty, mode } => {
            let active = psi < TAU * duty;
            match (mode, active) {
                (SquareMode::Bipolar, true) => 1.0,
                (SquareMode::Bipolar, false) => -1.0,
                (SquareMode::PullOnly, true) => -1.0,
                (SquareMode::PushOnly, true) => 1.0,
                (_, false) => 0.0,
            }
        }
    }
}

/// Phase of each ray, `k·x` wrapped to `[0, 2π)`.
///
/// Forward waves carry an extra `π − k·(x_first + x_last)` so that the pattern
/// is the exact mirror of the backward wave along the fin, with no time shift.
pub fn ray_phases(positions: &[f64], wavelength: f64, direction: Direction) -> Vec<f64> {
    let k = TAU / wavelength;
    let offset = match (direction, positions.first(), positions.last()) {
        (Direction::Forward, Some(a), Some(b)) => PI - k * (a + b),
        _ => 0.0,
    };
    positions.iter().map(|&x| wrap(k * x + offset)).collect()
}

/// Coil current of one ray at time `t`.
pub fn drive_current(t: f64, plan: &WavePlan, phase: f64, power_scale: f64) -> f64 {
    let scale = plan.power_semantics.current_scale(power_scale);
    scale * plan.current_amplitude * unit_value(plan.waveform, plan.argument(t, phase))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NyquistStatus {
    Ok,
    /// Rays are too sparse for the wave; a standing wave is likely.
    StandingWaveRisk,
}

pub fn nyquist_check(ray_spacing: f64, wavelength: f64) -> NyquistStatus {
    if ray_spacing <= wavelength / 2.0 {
        NyquistStatus::Ok
    } else {
        NyquistStatus::StandingWaveRisk
    }
}

/// Power fraction per ray, in ray order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub per_ray_power: Vec<f64>,
}

/// Named wave envelopes. Rays are grouped front to back; "posterior" is the
/// tail end of the fin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeShape {
    Uniform,
    /// Rear half underpowered.
    PosteriorlyDecreasing,
    /// Front half underpowered.
    PosteriorlyIncreasing,
    /// First and last quarter underpowered.
    Diamond,
    /// Middle half underpowered.
    Bowtie,
}

impl EnvelopeShape {
    pub const ALL: [EnvelopeShape; 5] = [
        EnvelopeShape::Uniform,
        EnvelopeShape::PosteriorlyDecreasing,
        EnvelopeShape::Diamond,
        EnvelopeShape::PosteriorlyIncreasing,
        EnvelopeShape::Bowtie,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EnvelopeShape::Uniform => "uniform",
            EnvelopeShape::PosteriorlyDecreasing => "posteriorly-decreasing",
            EnvelopeShape::PosteriorlyIncreasing => "posteriorly-increasing",
            EnvelopeShape::Diamond => "diamond",
            EnvelopeShape::Bowtie => "bowtie",
        }
    }

    /// Whether the ray at `rank` (0 = most anterior) of `rays` is underpowered.
    fn reduced(self, rank: usize, rays: usize) -> bool {
        let q = rank * 4 / rays.max(1);
        match self {
            EnvelopeShape::Uniform => false,
            EnvelopeShape::PosteriorlyDecreasing => q >= 2,
            EnvelopeShape::PosteriorlyIncreasing => q < 2,
            EnvelopeShape::Diamond => q == 0 || q == 3,
            EnvelopeShape::Bowtie => q == 1 || q == 2,
        }
    }
}

impl std::str::FromStr for EnvelopeShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvelopeShape::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| Error::Domain(format!("unknown envelope '{s}'")))
    }
}

impl EnvelopeSpec {
    pub fn uniform(rays: usize) -> Self {
        Self {
            per_ray_power: vec![1.0; rays],
        }
    }

    /// Envelope on a fin whose rays are ordered tail first (increasing
    /// position toward the head), with the underpowered rays at `reduced_power`.
    pub fn shaped(shape: EnvelopeShape, rays: usize, reduced_power: f64) -> Self {
        let per_ray_power = (0..rays)
            .map(|i| {
                let rank_from_front = rays - 1 - i;
                if shape.reduced(rank_from_front, rays) {
                    reduced_power
                } else {
                    1.0
                }
            })
            .collect();
        Self { per_ray_power }
    }

    pub fn violations(&self, rays: usize) -> Vec<String> {
        let mut v = Vec::new();
        if self.per_ray_power.len() != rays {
            v.push(format!(
                "envelope has {} entries for {rays} rays",
                self.per_ray_power.len()
            ));
        }
        if self.per_ray_power.iter().any(|p| !(0.0..=1.0).contains(p)) {
            v.push("envelope powers must lie in [0, 1]".to_string());
        }
        v
    }

    /// Exact mean of the per-ray fractions.
    pub fn total_power_ratio(&self) -> BigRational {
        exact_mean(&self.per_ray_power)
    }

    pub fn total_power_fraction(&self) -> f64 {
        self.total_power_ratio().to_f64().unwrap_or(f64::NAN)
    }
}

/// Mean of binary fractions in exact rational arithmetic.
pub fn exact_mean(values: &[f64]) -> BigRational {
    if values.is_empty() {
        return BigRational::zero();
    }
    let sum = values
        .iter()
        .map(|&v| BigRational::from_float(v).unwrap_or_else(BigRational::zero))
        .fold(BigRational::zero(), |a, b| a + b);
    sum / BigRational::from_integer(values.len().into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayDrive {
    pub phase: f64,
    pub power_scale: f64,
    /// Multiplier on the plan's current amplitude.
    pub current_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedEnvelope {
    pub rays: Vec<RayDrive>,
    pub total_power_fraction: f64,
}

pub fn apply_envelope(plan: &WavePlan, positions: &[f64], env: &EnvelopeSpec) -> Result<AppliedEnvelope> {
    let v = env.violations(positions.len());
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let rays = ray_phases(positions, plan.wavelength, plan.direction)
        .into_iter()
        .zip(&env.per_ray_power)
        .map(|(phase, &p)| RayDrive {
            phase,
            power_scale: p,
            current_scale: plan.power_semantics.current_scale(p),
        })
        .collect();
    Ok(AppliedEnvelope {
        rays,
        total_power_fraction: env.total_power_fraction(),
    })
}

/// Total power fraction of several fins' envelopes taken together.
pub fn combined_power_fraction(envelopes: &[&EnvelopeSpec]) -> f64 {
    let all: Vec<f64> = envelopes
        .iter()
        .flat_map(|e| e.per_ray_power.iter().copied())
        .collect();
    exact_mean(&all).to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizationSpec {
    pub table_size: usize,
    pub pwm_bits: u32,
    #[serde(deserialize_with = "de_si::frequency")]
    pub update_rate: f64,
}

impl QuantizationSpec {
    /// Worst-case deviation from the ideal unit sine: half a table step of
    /// phase plus one PWM step.
    pub fn error_bound(&self) -> f64 {
        PI / self.table_size as f64 + 2f64.powi(-(self.pwm_bits as i32))
    }

    pub fn violations(&self, frequency: f64) -> Vec<String> {
        let mut v = Vec::new();
        if self.table_size < 16 {
            v.push("table_size must be ≥ 16".to_string());
        }
        if !(4..=52).contains(&self.pwm_bits) {
            v.push("pwm_bits must be in [4, 52]".to_string());
        }
        if !(self.update_rate > 2.0 * frequency) {
            v.push("update_rate must exceed twice the drive frequency".to_string());
        }
        v
    }
}

/// Lookup table of one sine period.
#[derive(Debug, Clone)]
pub struct SineTable {
    values: Vec<f64>,
}

impl SineTable {
    pub fn new(size: usize) -> Self {
        Self {
            values: (0..size).map(|j| (TAU * j as f64 / size as f64).sin()).collect(),
        }
    }

    /// Entry nearest to the wrapped phase `psi`.
    pub fn lookup(&self, psi: f64) -> f64 {
        let n = self.values.len();
        let idx = (psi / TAU * n as f64).round() as usize % n;
        self.values[idx]
    }
}

/// Signed duty in `[-1, 1]` rounded to the PWM resolution.
pub fn quantize_duty(value: f64, pwm_bits: u32) -> f64 {
    let levels = (2f64.powi(pwm_bits as i32) - 1.0).max(1.0);
    (value.clamp(-1.0, 1.0) * levels).round() / levels
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DutySample {
    pub time: f64,
    /// Fraction of the plan's current amplitude; the sign selects the
    /// H-bridge direction.
    pub duty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizedDrive {
    pub samples: Vec<DutySample>,
}

impl QuantizedDrive {
    pub fn to_csv(&self) -> String {
        let mut t = Table::new(&["time_s", "duty_signed"]);
        for s in &self.samples {
            t.row(&[num(s.time), num(s.duty)]);
        }
        t.render()
    }
}

/// Firmware drive of a ray at phase 0 and full power.
pub fn quantize_drive(plan: &WavePlan, q: &QuantizationSpec, duration: f64) -> Result<QuantizedDrive> {
    quantize_ray(plan, q, duration, 0.0, 1.0)
}

/// Firmware drive sampled at the update rate: nearest-entry table lookup of
/// the waveform, envelope scaling, then rounding to the PWM resolution.
pub fn quantize_ray(
    plan: &WavePlan,
    q: &QuantizationSpec,
    duration: f64,
    phase: f64,
    power_scale: f64,
) -> Result<QuantizedDrive> {
    let v = q.violations(plan.frequency);
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    if !(duration >= 0.0) {
        return Err(Error::Domain("duration must be ≥ 0".into()));
    }
    let table = SineTable::new(q.table_size);
    let scale = if plan.current_amplitude > 0.0 {
        plan.power_semantics.current_scale(power_scale)
    } else {
        0.0
    };
    let n = (duration * q.update_rate).floor() as usize;
    let samples = (0..=n)
        .map(|i| {
            let time = i as f64 / q.update_rate;
            let psi = plan.argument(time, phase);
            let unit = match plan.waveform {
                Waveform::Sine => table.lookup(psi),
                w => unit_value(w, psi),
            };
            DutySample {
                time,
                duty: quantize_duty(scale * unit, q.pwm_bits),
            }
        })
        .collect();
    Ok(QuantizedDrive { samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const CUTTLE_RAYS: [f64; 4] = [0.0, 0.035, 0.07, 0.105];

    #[test]
    fn phases_at_two_fin_lengths() {
        let phases = ray_phases(&CUTTLE_RAYS, 0.21, Direction::Backward);
        for (p, deg) in phases.iter().zip([0.0, 60.0, 120.0, 180.0]) {
            assert_relative_eq!(p.to_degrees(), deg, epsilon = 1e-9);
        }
        // Same phases from the drive itself at t = 0.
        let plan = WavePlan::sine(1.0, 0.21, 1.0, Direction::Backward);
        for (&x, p) in CUTTLE_RAYS.iter().zip(&phases) {
            let direct = (TAU / 0.21 * x).sin();
            assert_relative_eq!(drive_current(0.0, &plan, *p, 1.0), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn long_wave_is_synchronous_flapping() {
        assert!(ray_phases(&CUTTLE_RAYS, 1e6, Direction::Backward).iter().all(|p| *p < 1e-6));
    }

    #[test]
    fn half_wave_spacing() {
        let p = ray_phases(&CUTTLE_RAYS, 0.07, Direction::Backward);
        for w in p.windows(2) {
            let d = wrap(w[1] - w[0]);
            assert!((d - PI).abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn sine_drive_values() {
        let plan = WavePlan::sine(0.212, 0.2625, 2.0, Direction::Forward);
        assert_eq!(drive_current(0.0, &plan, 0.0, 1.0), 0.0);
        assert_relative_eq!(drive_current(0.0, &plan, PI / 2.0, 1.0), 0.212, epsilon = 1e-15);
        let backward = plan.with_direction(Direction::Backward);
        let quarter = 0.25 / plan.frequency;
        assert_relative_eq!(drive_current(quarter, &backward, 0.0, 1.0), 0.212, epsilon = 1e-15);
        assert_relative_eq!(
            drive_current(0.0, &plan, PI / 2.0, 0.2),
            0.2f64.sqrt() * 0.212,
            epsilon = 1e-15
        );
        assert_relative_eq!(0.2f64.sqrt(), 0.447, epsilon = 1e-3);
    }

    #[test]
    fn current_semantics_is_linear() {
        let mut plan = WavePlan::sine(1.0, 0.2, 1.0, Direction::Forward);
        plan.power_semantics = PowerSemantics::Current;
        assert_relative_eq!(drive_current(0.0, &plan, PI / 2.0, 0.2), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn square_modes() {
        let mut plan = WavePlan::sine(0.2, 1e6, 1.0, Direction::Backward);
        plan.waveform = Waveform::Square {
            duty: 0.5,
            mode: SquareMode::Bipolar,
        };
        assert_eq!(drive_current(0.1, &plan, 0.0, 1.0), 0.2);
        assert_eq!(drive_current(0.6, &plan, 0.0, 1.0), -0.2);
        plan.waveform = Waveform::Square {
            duty: 0.5,
            mode: SquareMode::PullOnly,
        };
        assert_eq!(drive_current(0.1, &plan, 0.0, 1.0), -0.2);
        assert_eq!(drive_current(0.6, &plan, 0.0, 1.0), 0.0);
        plan.waveform = Waveform::Square {
            duty: 0.25,
            mode: SquareMode::PushOnly,
        };
        assert_eq!(drive_current(0.1, &plan, 0.0, 1.0), 0.2);
        assert_eq!(drive_current(0.3, &plan, 0.0, 1.0), 0.0);
    }

    #[test]
    fn nyquist_cases() {
        assert_eq!(nyquist_check(0.035, 0.07), NyquistStatus::Ok);
        assert_eq!(nyquist_check(0.035, 0.0525), NyquistStatus::StandingWaveRisk);
        assert_eq!(nyquist_check(0.035, 0.42), NyquistStatus::Ok);
    }

    #[test]
    fn plan_invariants() {
        let mut plan = WavePlan::sine(0.3, 0.2, 1.0, Direction::Forward);
        assert_eq!(plan.violations(0.212).len(), 1);
        plan.current_amplitude = 0.2;
        plan.waveform = Waveform::Square {
            duty: 1.0,
            mode: SquareMode::Bipolar,
        };
        assert_eq!(plan.violations(0.212), vec!["duty must be in (0, 1)"]);
        plan.wavelength = 0.0;
        assert_eq!(plan.violations(0.212).len(), 2);
    }

    #[test]
    fn plan_parses_with_units() {
        let plan: WavePlan = toml::from_str(
            "current_amplitude = \"212 mA\"\nwavelength = \"262.5 mm\"\nfrequency = \"2 Hz\"\ndirection = \"backward\"\nwaveform = { kind = \"square\", duty = 0.5, mode = \"pull-only\" }\n",
        )
        .unwrap();
        assert_eq!(plan.wavelength, 0.2625);
        assert!(matches!(plan.waveform, Waveform::Square { mode: SquareMode::PullOnly, .. }));
        assert_eq!(plan.power_semantics, PowerSemantics::Electrical);
    }

    #[test]
    fn envelope_totals_are_exact() {
        let robot = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(exact_mean(&robot), BigRational::new(1.into(), 2.into()));
        let partial = [1.0, 1.0, 1.0, 1.0, 0.2, 0.2, 0.2, 0.2];
        assert_eq!(exact_mean(&partial).to_f64().unwrap(), 0.6);
        let uniform = EnvelopeSpec::uniform(4);
        assert_eq!(combined_power_fraction(&[&uniform, &uniform]), 1.0);
    }

    #[test]
    fn named_envelopes_on_four_rays() {
        // Tail-first ray order: index 0 is the posterior ray.
        let cases = [
            (EnvelopeShape::Uniform, [1.0, 1.0, 1.0, 1.0]),
            (EnvelopeShape::PosteriorlyDecreasing, [0.0, 0.0, 1.0, 1.0]),
            (EnvelopeShape::PosteriorlyIncreasing, [1.0, 1.0, 0.0, 0.0]),
            (EnvelopeShape::Diamond, [0.0, 1.0, 1.0, 0.0]),
            (EnvelopeShape::Bowtie, [1.0, 0.0, 0.0, 1.0]),
        ];
        for (shape, expected) in cases {
            let env = EnvelopeSpec::shaped(shape, 4, 0.0);
            assert_eq!(env.per_ray_power, expected, "{shape:?}");
            if shape != EnvelopeShape::Uniform {
                assert_eq!(env.total_power_fraction(), 0.5);
                assert_eq!(EnvelopeSpec::shaped(shape, 4, 0.2).total_power_fraction(), 0.6);
            }
        }
    }

    #[test]
    fn envelope_length_mismatch() {
        let plan = WavePlan::sine(0.2, 0.2, 1.0, Direction::Forward);
        assert!(apply_envelope(&plan, &CUTTLE_RAYS, &EnvelopeSpec::uniform(3)).is_err());
        let applied = apply_envelope(&plan, &CUTTLE_RAYS, &EnvelopeSpec::shaped(EnvelopeShape::Bowtie, 4, 0.2)).unwrap();
        assert_relative_eq!(applied.rays[1].current_scale, 0.2f64.sqrt());
        assert_relative_eq!(applied.total_power_fraction, 0.6);
    }

    #[test]
    fn quantization_error_is_bounded_over_table() {
        let q = QuantizationSpec {
            table_size: 256,
            pwm_bits: 8,
            update_rate: 256.0 * 16.0,
        };
        // One period sampled sixteen times per table entry.
        let plan = WavePlan::sine(0.212, 1e6, 1.0, Direction::Backward);
        let drive = quantize_drive(&plan, &q, 1.0).unwrap();
        let bound = q.error_bound();
        assert_relative_eq!(bound, PI / 256.0 + 1.0 / 256.0);
        let worst = drive
            .samples
            .iter()
            .map(|s| (s.duty - (TAU * s.time).sin()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= bound, "{worst} > {bound}");
        // Every table entry, quantised.
        let table = SineTable::new(256);
        for j in 0..256 {
            let psi = TAU * j as f64 / 256.0;
            let d = quantize_duty(table.lookup(psi), 8);
            assert!((d - psi.sin()).abs() <= bound);
        }
    }

    #[test]
    fn fine_quantization_converges() {
        let q = QuantizationSpec {
            table_size: 1 << 20,
            pwm_bits: 24,
            update_rate: 1000.0,
        };
        let plan = WavePlan::sine(0.1, 1e6, 1.3, Direction::Backward);
        let drive = quantize_drive(&plan, &q, 1.0).unwrap();
        for s in &drive.samples {
            assert!((s.duty - (TAU * 1.3 * s.time).sin()).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_plan_quantizes_to_zero() {
        let q = QuantizationSpec {
            table_size: 64,
            pwm_bits: 8,
            update_rate: 100.0,
        };
        let plan = WavePlan::sine(0.0, 0.2, 2.0, Direction::Backward);
        let drive = quantize_drive(&plan, &q, 2.0).unwrap();
        assert_eq!(drive.samples.len(), 201);
        assert!(drive.samples.iter().all(|s| s.duty == 0.0));
        assert!(drive.to_csv().starts_with("time_s,duty_signed\n"));
    }

    #[test]
    fn quantization_rejects_slow_update() {
        let q = QuantizationSpec {
            table_size: 64,
            pwm_bits: 8,
            update_rate: 3.0,
        };
        assert!(quantize_drive(&WavePlan::sine(0.1, 0.2, 2.0, Direction::Forward), &q, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn drive_is_bounded(t in 0.0f64..100.0, phase in 0.0f64..TAU, p in 0.0f64..1.0,
                            f in 0.1f64..10.0, lambda in 0.01f64..1.0, duty in 0.05f64..0.95) {
            let mut plan = WavePlan::sine(0.212, lambda, f, Direction::Backward);
            prop_assert!(drive_current(t, &plan, phase, p).abs() <= 0.212);
            plan.waveform = Waveform::Square { duty, mode: SquareMode::Bipolar };
            prop_assert!(drive_current(t, &plan, phase, p).abs() <= 0.212);
        }

        #[test]
        fn drive_is_periodic(n in 0u32..200, phase in 0.0f64..TAU, f in 0.1f64..10.0) {
            let plan = WavePlan::sine(0.212, 0.2625, f, Direction::Forward);
            let t = n as f64 / f;
            let a = drive_current(t, &plan, phase, 1.0);
            let b = drive_current(0.0, &plan, phase, 1.0);
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn reversal_mirrors_the_ray_order(t in 0.0f64..10.0, f in 0.2f64..5.0, lambda in 0.05f64..1.0) {
            let plan = WavePlan::sine(0.2, lambda, f, Direction::Forward);
            let back = plan.with_direction(Direction::Backward);
            let fwd_phases = ray_phases(&CUTTLE_RAYS, lambda, Direction::Forward);
            let back_phases = ray_phases(&CUTTLE_RAYS, lambda, Direction::Backward);
            for i in 0..4 {
                let a = drive_current(t, &plan, fwd_phases[i], 1.0);
                let b = drive_current(t, &back, back_phases[3 - i], 1.0);
                prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
            }
        }
    }
}
