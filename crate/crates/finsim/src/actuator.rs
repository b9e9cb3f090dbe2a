//! Single fin-ray dynamics: VCA force law, equilibrium deflection, step and
//! frequency response.
//!
//! The ray is one lumped mode in the coil stroke coordinate `s`:
//!
//! ```text
//! M ṡ̈ = F(I, s) − k·mf·s − c₁·mf·md·ṡ − c₂·md·ṡ|ṡ| − m_load·g·r
//! F(I, s) = K·I·exp(−s² / 2w²)
//! ```
//!
//! with `M` the coil inertia plus the tip load referred through the lever
//! (`m_load·r²`). The stroke is hard-limited to `±stroke_limit`; contact is
//! perfectly inelastic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::model::{RayModel, VcaParams};
use crate::table::{num, Table};

/// Default integration step.
pub const DEFAULT_DT: f64 = 1e-3;

/// Residual force accepted by the equilibrium solver.
const STATIC_FORCE_TOLERANCE: f64 = 1e-6;

pub fn vca_force(current: f64, stroke: f64, p: &VcaParams) -> Result<f64> {
    if !(stroke.abs() <= p.stroke_limit) {
        return Err(Error::Domain(format!(
            "stroke {stroke} m outside travel ±{} m",
            p.stroke_limit
        )));
    }
    Ok(bell_force(current, stroke, p.force_constant, p.bell_width))
}

#[inline]
fn bell_force(current: f64, stroke: f64, force_constant: f64, bell_width: f64) -> f64 {
    force_constant * current * (-(stroke * stroke) / (2.0 * bell_width * bell_width)).exp()
}

#[inline]
pub fn tip_from_stroke(stroke: f64, ratio: f64) -> f64 {
    ratio * stroke
}

#[inline]
pub fn stroke_from_tip(tip: f64, ratio: f64) -> f64 {
    tip / ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticDeflection {
    /// Signed tip deflection.
    pub tip: f64,
    pub stroke: f64,
    /// No interior equilibrium: the coil rests on a travel stop.
    pub saturated: bool,
}

/// Equilibrium tip deflection under a constant current.
pub fn static_deflection(current: f64, ray: &RayModel) -> StaticDeflection {
    let limit = ray.vca.stroke_limit;
    let k = ray.effective_stiffness();
    let bias = ray.gravity_bias();
    let residual = |s: f64| {
        bell_force(current, s, ray.vca.force_constant, ray.vca.bell_width) - k * s - bias
    };

    let at = |stroke: f64, saturated: bool| StaticDeflection {
        tip: tip_from_stroke(stroke, ray.transmission_ratio),
        stroke,
        saturated,
    };
    if residual(limit) >= 0.0 {
        return at(limit, true);
    }
    if residual(-limit) <= 0.0 {
        return at(-limit, true);
    }

    // residual(lo) > 0 > residual(hi)
    let (mut lo, mut hi) = (-limit, limit);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let r = residual(mid);
        if r.abs() < STATIC_FORCE_TOLERANCE * 1e-3 || hi - lo < 1e-15 {
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(mid, false)
}

/// Position and velocity of the coil.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RayState {
    pub stroke: f64,
    pub stroke_velocity: f64,
    pub time: f64,
}

/// Precomputed coefficients of the stroke-coordinate equation of motion.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RayDynamics {
    force_constant: f64,
    inv_two_w2: f64,
    pub(crate) limit: f64,
    pub(crate) inertia: f64,
    pub(crate) stiffness: f64,
    damping_linear: f64,
    damping_quadratic: f64,
    pub(crate) bias: f64,
    pub(crate) ratio: f64,
}

impl RayDynamics {
    pub(crate) fn new(ray: &RayModel) -> Self {
        Self {
            force_constant: ray.vca.force_constant,
            inv_two_w2: 1.0 / (2.0 * ray.vca.bell_width * ray.vca.bell_width),
            limit: ray.vca.stroke_limit,
            inertia: ray.stroke_inertia(),
            stiffness: ray.effective_stiffness(),
            damping_linear: ray.effective_damping_linear(),
            damping_quadratic: ray.effective_damping_quadratic(),
            bias: ray.gravity_bias(),
            ratio: ray.transmission_ratio,
        }
    }

    /// Acceleration with an extra stroke-coordinate force (e.g. membrane coupling).
    #[inline]
    pub(crate) fn accel(&self, s: f64, v: f64, current: f64, external: f64) -> f64 {
        let drive = self.force_constant * current * (-(s * s) * self.inv_two_w2).exp();
        (drive - self.stiffness * s
            - self.damping_linear * v
            - self.damping_quadratic * v * v.abs()
            - self.bias
            + external)
            / self.inertia
    }

    /// Travel stops: position clamped, outward velocity removed.
    #[inline]
    pub(crate) fn clamp(&self, s: f64, v: f64) -> (f64, f64) {
        if s > self.limit {
            (self.limit, v.min(0.0))
        } else if s < -self.limit {
            (-self.limit, v.max(0.0))
        } else {
            (s, v)
        }
    }

    /// Kinetic plus spring plus load potential energy.
    pub(crate) fn energy(&self, s: f64, v: f64) -> f64 {
        0.5 * self.inertia * v * v + 0.5 * self.stiffness * s * s + self.bias * s
    }

    /// One RK4 step with the current sampled at t, t + dt/2 and t + dt.
    #[inline]
    pub(crate) fn rk4(&self, s: f64, v: f64, i0: f64, ih: f64, i1: f64, dt: f64) -> (f64, f64) {
        let a1 = self.accel(s, v, i0, 0.0);
        let (s2, v2) = (s + 0.5 * dt * v, v + 0.5 * dt * a1);
        let a2 = self.accel(s2, v2, ih, 0.0);
        let (s3, v3) = (s + 0.5 * dt * v2, v + 0.5 * dt * a2);
        let a3 = self.accel(s3, v3, ih, 0.0);
        let (s4, v4) = (s + dt * v3, v + dt * a3);
        let a4 = self.accel(s4, v4, i1, 0.0);
        let s_new = s + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
        let v_new = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        self.clamp(s_new, v_new)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub time: f64,
    pub tip_deflection: f64,
    pub stroke: f64,
}

/// Uniformly sampled tip record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub samples: Vec<SeriesSample>,
}

impl TimeSeries {
    pub fn tips(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tip_deflection).collect()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut t = Table::new(&["time_s", "tip_m", "stroke_m"]);
        for s in &self.samples {
            t.row(&[num(s.time), num(s.tip_deflection), num(s.stroke)]);
        }
        t.render()
    }
}

/// Integrate the ray under an arbitrary drive current `current(t)`.
pub fn simulate_ray(
    ray: &RayModel,
    initial: RayState,
    duration: f64,
    dt: f64,
    current: impl Fn(f64) -> f64,
) -> Result<TimeSeries> {
    let states = integrate_states(ray, initial, duration, dt, current)?;
    let ratio = ray.transmission_ratio;
    Ok(TimeSeries {
        dt,
        samples: states
            .iter()
            .map(|s| SeriesSample {
                time: s.time,
                tip_deflection: tip_from_stroke(s.stroke, ratio),
                stroke: s.stroke,
            })
            .collect(),
    })
}

/// Full coil state at every step of [`simulate_ray`].
pub fn integrate_states(
    ray: &RayModel,
    initial: RayState,
    duration: f64,
    dt: f64,
    current: impl Fn(f64) -> f64,
) -> Result<Vec<RayState>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
    }
    if !(duration >= 10.0 * dt) {
        return Err(Error::Domain(format!(
            "duration {duration} s shorter than ten steps of {dt} s"
        )));
    }
    let dyn_ = RayDynamics::new(ray);
    let steps = (duration / dt).round() as usize;
    let (mut s, mut v) = dyn_.clamp(initial.stroke, initial.stroke_velocity);
    let t0 = initial.time;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(RayState {
        stroke: s,
        stroke_velocity: v,
        time: t0,
    });
    for n in 0..steps {
        let t = t0 + n as f64 * dt;
        (s, v) = dyn_.rk4(s, v, current(t), current(t + 0.5 * dt), current(t + dt), dt);
        if !(s.is_finite() && v.is_finite()) {
            return Err(Error::NonFinite {
                step: n + 1,
                time: t + dt,
            });
        }
        states.push(RayState {
            stroke: s,
            stroke_velocity: v,
            time: t0 + (n + 1) as f64 * dt,
        });
    }
    Ok(states)
}

/// Kinetic, spring and load potential energy of the coil state.
pub fn mechanical_energy(ray: &RayModel, state: &RayState) -> f64 {
    RayDynamics::new(ray).energy(state.stroke, state.stroke_velocity)
}

/// Pulled to the equilibrium at `−current`, then a `+current` step is held.
pub fn step_response(ray: &RayModel, current: f64, duration: f64, dt: f64) -> Result<TimeSeries> {
    let start = static_deflection(-current, ray);
    simulate_ray(
        ray,
        RayState {
            stroke: start.stroke,
            ..RayState::default()
        },
        duration,
        dt,
        |_| current,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEntry {
    pub frequency: f64,
    pub peak_to_peak: f64,
    pub normalized_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GainCurve {
    pub entries: Vec<GainEntry>,
}

impl GainCurve {
    pub fn to_csv(&self) -> String {
        let mut t = Table::new(&["freq_hz", "pkpk_m", "gain"]);
        for e in &self.entries {
            t.row(&[num(e.frequency), num(e.peak_to_peak), num(e.normalized_gain)]);
        }
        t.render()
    }
}

/// Static peak-to-peak tip travel between `−current` and `+current`.
pub fn static_peak_to_peak(current: f64, ray: &RayModel) -> f64 {
    static_deflection(current, ray).tip - static_deflection(-current, ray).tip
}

/// Sinusoidal drive `A·sin(2πft)` from rest at the zero-current equilibrium;
/// the steady peak-to-peak tip amplitude is taken over the last `cycles/2`
/// periods and normalised by the static peak-to-peak at `A`.
pub fn frequency_response(
    ray: &RayModel,
    current_amplitude: f64,
    frequencies: &[f64],
    cycles: usize,
) -> Result<GainCurve> {
    frequency_response_with_dt(ray, current_amplitude, frequencies, cycles, DEFAULT_DT)
}

/// As [`frequency_response`], with the step capped at `max_dt` (and at 1/100
/// of each drive period).
pub fn frequency_response_with_dt(
    ray: &RayModel,
    current_amplitude: f64,
    frequencies: &[f64],
    cycles: usize,
    max_dt: f64,
) -> Result<GainCurve> {
    if cycles < 10 {
        return Err(Error::Domain(format!("need at least 10 cycles, got {cycles}")));
    }
    if frequencies.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(Error::Domain("frequencies must be > 0".into()));
    }
    if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("frequencies must be strictly increasing".into()));
    }
    let static_pp = static_peak_to_peak(current_amplitude, ray);
    let rest = static_deflection(0.0, ray).stroke;

    let entries = frequencies
        .par_iter()
        .map(|&f| {
            let period = 1.0 / f;
            let dt = max_dt.min(period / 100.0);
            let per_period = (period / dt).round();
            let dt = period / per_period;
            let omega = 2.0 * std::f64::consts::PI * f;
            let series = simulate_ray(
                ray,
                RayState {
                    stroke: rest,
                    ..RayState::default()
                },
                cycles as f64 * period,
                dt,
                |t| current_amplitude * (omega * t).sin(),
            )?;
            let pp = analysis::steady_amplitude(&series, f)?.peak_to_peak;
            Ok(GainEntry {
                frequency: f,
                peak_to_peak: pp,
                normalized_gain: if static_pp > 0.0 { pp / static_pp } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainCurve { entries })
}

/// Ohmic coil power `I_rms²·R`.
pub fn coil_power(current_rms: f64, resistance: f64) -> f64 {
    current_rms * current_rms * resistance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, PresetName};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ray() -> RayModel {
        preset(PresetName::SingleRay).fins[0].ray.clone()
    }

    fn vca_2mm() -> VcaParams {
        VcaParams {
            bell_width: 0.002,
            ..ray().vca
        }
    }

    #[test]
    fn peak_force_at_stroke_centre() {
        assert_relative_eq!(vca_force(0.480, 0.0, &vca_2mm()).unwrap(), 0.490, epsilon = 1e-12);
    }

    #[test]
    fn zero_current_zero_force() {
        assert_eq!(vca_force(0.0, 0.001, &vca_2mm()).unwrap(), 0.0);
    }

    #[test]
    fn force_at_travel_end() {
        // Gaussian evaluated at one bell width.
        let f = vca_force(0.480, 0.002, &vca_2mm()).unwrap();
        assert_relative_eq!(f, 0.490 * (-0.5f64).exp(), epsilon = 1e-12);
        assert!((f - 0.297).abs() < 5e-4);
        // Independent evaluation at intermediate strokes.
        for i in 1..=10 {
            let s = 0.002 * i as f64 / 10.0;
            let x = s / 0.002;
            let expected = 0.490 / (0.5 * x * x).exp();
            assert_relative_eq!(vca_force(0.480, s, &vca_2mm()).unwrap(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn force_outside_travel_is_domain_error() {
        assert!(matches!(vca_force(0.1, 0.0021, &vca_2mm()), Err(Error::Domain(_))));
    }

    #[test]
    fn transmission() {
        assert_relative_eq!(tip_from_stroke(0.002, 11.75), 0.0235, epsilon = 1e-15);
        assert_relative_eq!(2.0 * tip_from_stroke(0.002, 11.75), 0.047, epsilon = 1e-15);
        assert_eq!(tip_from_stroke(0.0, 11.75), 0.0);
        assert_relative_eq!(tip_from_stroke(-0.002, 11.75), -0.0235, epsilon = 1e-15);
        assert_relative_eq!(stroke_from_tip(tip_from_stroke(0.0013, 11.75), 11.75), 0.0013, epsilon = 1e-18);
    }

    #[test]
    fn static_zero_current_unloaded() {
        let d = static_deflection(0.0, &ray());
        assert_eq!(d.tip, 0.0);
        assert!(!d.saturated);
    }

    #[test]
    fn static_saturates_at_travel() {
        let r = ray();
        let at_212 = static_deflection(0.212, &r);
        assert!(at_212.tip >= 0.99 * 0.0235 && at_212.tip <= 0.0235, "{at_212:?}");
        let at_250 = static_deflection(0.250, &r);
        assert!(at_250.saturated);
        assert_relative_eq!(at_250.tip, 0.0235, epsilon = 1e-12);
    }

    #[test]
    fn static_matches_dense_scan() {
        let r = ray();
        let d = static_deflection(0.106, &r);
        assert!(d.tip > 0.0 && d.tip < 0.0235);
        // Independent oracle: brute-force scan for the sign change of the residual.
        let n = 10_000;
        let limit = r.vca.stroke_limit;
        let res = |s: f64| {
            r.vca.force_constant * 0.106 * (-(s * s) / (2.0 * r.vca.bell_width.powi(2))).exp()
                - r.stiffness * s
        };
        let mut root = f64::NAN;
        for i in 0..n {
            let a = -limit + 2.0 * limit * i as f64 / n as f64;
            let b = -limit + 2.0 * limit * (i + 1) as f64 / n as f64;
            if res(a) > 0.0 && res(b) <= 0.0 {
                root = 0.5 * (a + b);
            }
        }
        assert!((tip_from_stroke(root, 11.75) - d.tip).abs() < 1e-6 * 11.75);
        let residual = bell_force(0.106, d.stroke, r.vca.force_constant, r.vca.bell_width)
            - r.stiffness * d.stroke;
        assert!(residual.abs() < 1e-6);
    }

    #[test]
    fn static_is_monotone_in_current() {
        let r = ray();
        let tips: Vec<f64> = (0..50)
            .map(|i| static_deflection(-0.3 + 0.6 * i as f64 / 49.0, &r).tip)
            .collect();
        assert!(tips.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn saturation_plateau() {
        let r = ray();
        let base = static_deflection(0.212, &r).tip;
        for i in 0..20 {
            let tip = static_deflection(0.212 + 0.02 * i as f64, &r).tip;
            assert!((tip - base).abs() / base < 0.01);
        }
    }

    #[test]
    fn load_shifts_neutral_toward_pull() {
        let loaded = ray().with_load(333e-6);
        assert!(static_deflection(0.0, &loaded).tip < 0.0);
        let mut heavier = loaded.clone();
        heavier.load_mass = 667e-6;
        assert!(static_deflection(0.0, &heavier).tip < static_deflection(0.0, &loaded).tip);
    }

    #[test]
    fn zero_step_from_rest_stays_zero() {
        let series = step_response(&ray(), 0.0, 0.5, 1e-3).unwrap();
        assert!(series.samples.iter().all(|s| s.tip_deflection == 0.0));
        assert_eq!(series.samples.len(), 501);
    }

    #[test]
    fn step_response_rejects_bad_steps() {
        assert!(step_response(&ray(), 0.2, 1.0, 0.0).is_err());
        assert!(step_response(&ray(), 0.2, 1.0, -1e-3).is_err());
        assert!(step_response(&ray(), 0.2, 0.005, 1e-3).is_err());
    }

    #[test]
    fn non_finite_state_reports_step() {
        let mut r = ray();
        r.effective_mass = 1e-300;
        match step_response(&r, 0.2, 0.1, 1e-3) {
            Err(Error::NonFinite { step, .. }) => assert!(step >= 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_times_are_uniform() {
        let series = step_response(&ray(), 0.212, 0.2, 1e-3).unwrap();
        for (i, s) in series.samples.iter().enumerate() {
            assert_relative_eq!(s.time, i as f64 * 1e-3, epsilon = 1e-12);
            assert!(s.stroke.abs() <= ray().vca.stroke_limit);
        }
    }

    #[test]
    fn halving_dt_preserves_final_tip() {
        let r = ray().with_load(333e-6);
        let coarse = step_response(&r, 0.212, 1.0, 1e-3).unwrap();
        let fine = step_response(&r, 0.212, 1.0, 1e-4).unwrap();
        let a = coarse.samples.last().unwrap().tip_deflection;
        let b = fine.samples.last().unwrap().tip_deflection;
        assert!((a - b).abs() / b.abs() < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn quasi_static_gain_is_unity() {
        let curve = frequency_response(&ray(), 0.1, &[0.1], 10).unwrap();
        assert!((curve.entries[0].normalized_gain - 1.0).abs() < 0.02, "{curve:?}");
    }

    #[test]
    fn frequency_response_preconditions() {
        assert!(frequency_response(&ray(), 0.1, &[1.0], 5).is_err());
        assert!(frequency_response(&ray(), 0.1, &[0.0], 10).is_err());
        assert!(frequency_response(&ray(), 0.1, &[2.0, 1.0], 10).is_err());
    }

    #[test]
    fn coil_power_values() {
        assert_relative_eq!(coil_power(0.15, 25.0), 0.5625, epsilon = 1e-15);
        assert_eq!(coil_power(0.0, 25.0), 0.0);
        // Eight coils at 212 mA peak: the overhead that yields 11.8 W.
        let overhead = 11.8 / (8.0 * coil_power(0.15, 25.0));
        assert_relative_eq!(overhead, 2.6222, max_relative = 1e-4);
    }

    #[test]
    fn csv_headers() {
        let series = step_response(&ray(), 0.1, 0.02, 1e-3).unwrap();
        assert!(series.to_csv().starts_with("time_s,tip_m,stroke_m\n"));
        assert!(GainCurve::default().to_csv().starts_with("freq_hz,pkpk_m,gain\n"));
    }

    #[test]
    fn unforced_energy_never_increases() {
        let r = ray();
        let d = RayDynamics::new(&r);
        let (mut s, mut v) = (0.0015, -0.02);
        let mut e = d.energy(s, v);
        for _ in 0..3000 {
            (s, v) = d.rk4(s, v, 0.0, 0.0, 0.0, 1e-3);
            let e_new = d.energy(s, v);
            assert!(e_new <= e + 1e-15, "{e_new} > {e}");
            e = e_new;
        }
    }

    proptest! {
        #[test]
        fn force_parity(i in -0.5f64..0.5, s in -0.002f64..0.002) {
            let p = ray().vca;
            let f = vca_force(i, s, &p).unwrap();
            prop_assert_eq!(vca_force(-i, s, &p).unwrap(), -f);
            prop_assert_eq!(vca_force(i, -s, &p).unwrap(), f);
        }
    }
}
