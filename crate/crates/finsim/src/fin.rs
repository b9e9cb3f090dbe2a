//! Membrane-coupled rays of one fin: the simulated fin edge and amplitude maps.

use rayon::prelude::*;
use serde::Serialize;

use crate::actuator::{static_deflection, tip_from_stroke, RayDynamics};
use crate::analysis::{self, steady_amplitude_of};
use crate::error::{Error, Result};
use crate::gait::{apply_envelope, drive_current, EnvelopeSpec, RayDrive, WavePlan};
use crate::model::FinAssemblyConfig;
use crate::table::{num, Table};

/// Drive periods simulated per heatmap cell; the last half is analysed.
pub const HEATMAP_CYCLES: usize = 12;

/// Space-time record of ray tip deflections.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinField {
    pub ray_positions: Vec<f64>,
    pub dt: f64,
    /// `frames[n][i]`: tip deflection of ray `i` at time `n·dt`.
    pub frames: Vec<Vec<f64>>,
    /// Tip velocities matching `frames`; empty when not recorded.
    pub velocities: Vec<Vec<f64>>,
}

impl FinField {
    pub fn new(ray_positions: Vec<f64>, dt: f64, frames: Vec<Vec<f64>>) -> Self {
        Self {
            ray_positions,
            dt,
            frames,
            velocities: Vec::new(),
        }
    }

    pub fn ray_count(&self) -> usize {
        self.ray_positions.len()
    }

    pub fn duration(&self) -> f64 {
        self.frames.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn ray_series(&self, i: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f[i]).collect()
    }

    /// Tip velocity of ray `i` at frame `n`, by finite differences when not recorded.
    pub fn velocity(&self, n: usize, i: usize) -> f64 {
        if let Some(v) = self.velocities.get(n) {
            return v[i];
        }
        let last = self.frames.len() - 1;
        let (a, b) = (n.saturating_sub(1), (n + 1).min(last));
        if a == b {
            return 0.0;
        }
        (self.frames[b][i] - self.frames[a][i]) / ((b - a) as f64 * self.dt)
    }

    /// Steady peak-to-peak amplitude of each ray over the last half.
    pub fn steady_peak_to_peak(&self, drive_frequency: f64) -> Result<Vec<f64>> {
        (0..self.ray_count())
            .map(|i| Ok(steady_amplitude_of(&self.ray_series(i), self.dt, drive_frequency)?.peak_to_peak))
            .collect()
    }

    /// Largest steady peak-to-peak amplitude over the rays.
    pub fn max_peak_to_peak(&self, drive_frequency: f64) -> Result<f64> {
        Ok(self
            .steady_peak_to_peak(drive_frequency)?
            .into_iter()
            .fold(0.0, f64::max))
    }
}

/// Membrane link between neighbouring ray tips, referred to the stroke coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Link {
    pub stiffness: f64,
    pub damping: f64,
}

impl Link {
    pub fn of(fin: &FinAssemblyConfig) -> Self {
        let r2 = fin.ray.transmission_ratio * fin.ray.transmission_ratio;
        Self {
            stiffness: fin.coupling_stiffness * r2,
            damping: fin.coupling_damping * r2,
        }
    }
}

/// Stroke-coordinate coupling force on each ray from the links to its
/// neighbours. Each link acts equally and oppositely on its two rays.
pub(crate) fn coupling_forces(strokes: &[f64], velocities: &[f64], link: Link, out: &mut [f64]) {
    out.iter_mut().for_each(|f| *f = 0.0);
    if link.stiffness == 0.0 && link.damping == 0.0 {
        return;
    }
    for i in 0..strokes.len().saturating_sub(1) {
        let f = link.stiffness * (strokes[i + 1] - strokes[i])
            + link.damping * (velocities[i + 1] - velocities[i]);
        out[i] += f;
        out[i + 1] -= f;
    }
}

/// Membrane forces on the rays of `fin` at the given coil strokes and
/// velocities, in the stroke coordinate.
pub fn membrane_forces(fin: &FinAssemblyConfig, strokes: &[f64], velocities: &[f64]) -> Result<Vec<f64>> {
    if strokes.len() != velocities.len() {
        return Err(Error::Domain("strokes and velocities differ in length".into()));
    }
    let mut out = vec![0.0; strokes.len()];
    coupling_forces(strokes, velocities, Link::of(fin), &mut out);
    Ok(out)
}

/// Coupled ray dynamics of one fin under a fixed drive.
struct FinSystem {
    ray: RayDynamics,
    link: Link,
    drives: Vec<RayDrive>,
    plan: WavePlan,
    force: Vec<f64>,
}

impl FinSystem {
    fn currents(&self, t: f64, out: &mut [f64]) {
        for (c, d) in out.iter_mut().zip(&self.drives) {
            *c = drive_current(t, &self.plan, d.phase, d.power_scale);
        }
    }

    fn derivative(&mut self, s: &[f64], v: &[f64], currents: &[f64], ds: &mut [f64], dv: &mut [f64]) {
        coupling_forces(s, v, self.link, &mut self.force);
        for i in 0..s.len() {
            ds[i] = v[i];
            dv[i] = self.ray.accel(s[i], v[i], currents[i], self.force[i]);
        }
    }
}

fn check_timing(frequency: f64, duration: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
    }
    if dt > 1.0 / (50.0 * frequency) * (1.0 + 1e-9) {
        return Err(Error::Domain(format!(
            "time step {dt} s exceeds 1/50 of the drive period"
        )));
    }
    if duration < 10.0 / frequency * (1.0 - 1e-9) {
        return Err(Error::Domain(format!(
            "duration {duration} s shorter than ten drive periods"
        )));
    }
    Ok(())
}

/// Integrate the coupled rays of `fin` from rest under `plan` and `env`.
pub fn simulate_fin(
    fin: &FinAssemblyConfig,
    plan: &WavePlan,
    env: &EnvelopeSpec,
    duration: f64,
    dt: f64,
) -> Result<FinField> {
    check_timing(plan.frequency, duration, dt)?;
    simulate_fin_unchecked(fin, plan, env, duration, dt)
}

/// [`simulate_fin`] without the sampling preconditions; used where the caller
/// has already chosen a compatible grid.
pub(crate) fn simulate_fin_unchecked(
    fin: &FinAssemblyConfig,
    plan: &WavePlan,
    env: &EnvelopeSpec,
    duration: f64,
    dt: f64,
) -> Result<FinField> {
    let applied = apply_envelope(plan, &fin.ray_positions, env)?;
    let n = fin.ray_positions.len();
    let ray = RayDynamics::new(&fin.ray);
    let mut sys = FinSystem {
        ray,
        link: Link::of(fin),
        drives: applied.rays,
        plan: plan.clone(),
        force: vec![0.0; n],
    };

    let rest = static_deflection(0.0, &fin.ray).stroke;
    let mut s = vec![rest; n];
    let mut v = vec![0.0; n];
    let steps = (duration / dt).round() as usize;
    let mut frames = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let record = |s: &[f64], v: &[f64], frames: &mut Vec<Vec<f64>>, velocities: &mut Vec<Vec<f64>>| {
        frames.push(s.iter().map(|&x| tip_from_stroke(x, ray.ratio)).collect());
        velocities.push(v.iter().map(|&x| tip_from_stroke(x, ray.ratio)).collect());
    };
    record(&s, &v, &mut frames, &mut velocities);

    let mut i0 = vec![0.0; n];
    let mut ih = vec![0.0; n];
    let mut i1 = vec![0.0; n];
    let (mut k1s, mut k1v) = (vec![0.0; n], vec![0.0; n]);
    let (mut k2s, mut k2v) = (vec![0.0; n], vec![0.0; n]);
    let (mut k3s, mut k3v) = (vec![0.0; n], vec![0.0; n]);
    let (mut k4s, mut k4v) = (vec![0.0; n], vec![0.0; n]);
    let (mut ts, mut tv) = (vec![0.0; n], vec![0.0; n]);

    for step in 0..steps {
        let t = step as f64 * dt;
        sys.currents(t, &mut i0);
        sys.currents(t + 0.5 * dt, &mut ih);
        sys.currents(t + dt, &mut i1);

        sys.derivative(&s, &v, &i0, &mut k1s, &mut k1v);
        for j in 0..n {
            ts[j] = s[j] + 0.5 * dt * k1s[j];
            tv[j] = v[j] + 0.5 * dt * k1v[j];
        }
        sys.derivative(&ts, &tv, &ih, &mut k2s, &mut k2v);
        for j in 0..n {
            ts[j] = s[j] + 0.5 * dt * k2s[j];
            tv[j] = v[j] + 0.5 * dt * k2v[j];
        }
        sys.derivative(&ts, &tv, &ih, &mut k3s, &mut k3v);
        for j in 0..n {
            ts[j] = s[j] + dt * k3s[j];
            tv[j] = v[j] + dt * k3v[j];
        }
        sys.derivative(&ts, &tv, &i1, &mut k4s, &mut k4v);
        for j in 0..n {
            let sn = s[j] + dt / 6.0 * (k1s[j] + 2.0 * k2s[j] + 2.0 * k3s[j] + k4s[j]);
            let vn = v[j] + dt / 6.0 * (k1v[j] + 2.0 * k2v[j] + 2.0 * k3v[j] + k4v[j]);
            (s[j], v[j]) = sys.ray.clamp(sn, vn);
            if !(s[j].is_finite() && v[j].is_finite()) {
                return Err(Error::NonFinite {
                    step: step + 1,
                    time: t + dt,
                });
            }
        }
        record(&s, &v, &mut frames, &mut velocities);
    }

    Ok(FinField {
        ray_positions: fin.ray_positions.clone(),
        dt,
        frames,
        velocities,
    })
}

/// Outcome of one (λ, f) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapCell {
    /// Largest steady peak-to-peak amplitude over the rays.
    pub peak_to_peak: Option<f64>,
    pub standing_wave_index: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapGrid {
    pub wavelengths: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// `cells[i][j]` at `wavelengths[i]`, `frequencies[j]`.
    pub cells: Vec<Vec<HeatmapCell>>,
}

impl HeatmapGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.cells[i][j].peak_to_peak.unwrap_or(f64::NAN)
    }

    pub fn index(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j].standing_wave_index
    }

    pub fn cell_at(&self, wavelength: f64, frequency: f64) -> Option<&HeatmapCell> {
        let i = nearest(&self.wavelengths, wavelength)?;
        let j = nearest(&self.frequencies, frequency)?;
        Some(&self.cells[i][j])
    }

    /// The maximising cell `(i, j, value)`; ties resolve to the first in
    /// wavelength-major order.
    pub fn peak(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if let Some(v) = c.peak_to_peak {
                    if best.is_none_or(|(_, _, b)| v > b) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        best
    }

    /// Every cell within `fraction` of the maximum.
    pub fn near_peak(&self, fraction: f64) -> Vec<(usize, usize)> {
        let Some((_, _, max)) = self.peak() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, row) in self.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if c.peak_to_peak.is_some_and(|v| v >= max * (1.0 - fraction)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut t = Table::new(&["lambda_m", "freq_hz", "pkpk_m", "swi"]);
        for (i, &l) in self.wavelengths.iter().enumerate() {
            for (j, &f) in self.frequencies.iter().enumerate() {
                let c = &self.cells[i][j];
                t.row(&[
                    num(l),
                    num(f),
                    c.peak_to_peak.map(num).unwrap_or_default(),
                    c.standing_wave_index.map(num).unwrap_or_default(),
                ]);
            }
        }
        t.render()
    }
}

fn nearest(axis: &[f64], x: f64) -> Option<usize> {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapOptions {
    /// Drive periods per cell.
    pub cycles: usize,
    /// Upper bound on the time step; each cell also uses at most 1/50 of its period.
    pub max_dt: f64,
    pub workers: usize,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self {
            cycles: HEATMAP_CYCLES,
            max_dt: 1e-3,
            workers: 1,
        }
    }
}

/// Time step for a cell: at most `max_dt` and 1/50 of the period, and a
/// whole fraction of the period.
pub fn cell_dt(frequency: f64, max_dt: f64) -> f64 {
    let period = 1.0 / frequency;
    let per_period = (period / max_dt.min(period / 50.0)).ceil();
    period / per_period
}

/// Simulate and analyse one (λ, f) cell.
pub fn heatmap_cell(
    fin: &FinAssemblyConfig,
    template: &WavePlan,
    env: &EnvelopeSpec,
    wavelength: f64,
    frequency: f64,
    options: &HeatmapOptions,
) -> HeatmapCell {
    let plan = WavePlan {
        wavelength,
        frequency,
        ..template.clone()
    };
    let dt = cell_dt(frequency, options.max_dt);
    let duration = options.cycles as f64 / frequency;
    let result = simulate_fin(fin, &plan, env, duration, dt).and_then(|field| {
        let pp = field.max_peak_to_peak(frequency)?;
        let index = if field.ray_count() >= 3 {
            analysis::wave_decompose(&field, frequency, wavelength)?.standing_wave_index
        } else {
            None
        };
        Ok((pp, index))
    });
    match result {
        Ok((pp, index)) => HeatmapCell {
            peak_to_peak: Some(pp),
            standing_wave_index: index,
            error: None,
        },
        Err(e) => HeatmapCell {
            peak_to_peak: None,
            standing_wave_index: None,
            error: Some(e.to_string()),
        },
    }
}

/// Steady amplitude and standing-wave index over a (λ, f) grid. Cells are
/// independent and evaluated on a pool of `options.workers` threads; the
/// result does not depend on scheduling.
pub fn amplitude_heatmap(
    fin: &FinAssemblyConfig,
    wavelengths: &[f64],
    frequencies: &[f64],
    template: &WavePlan,
    env: &EnvelopeSpec,
    options: &HeatmapOptions,
) -> Result<HeatmapGrid> {
    if wavelengths.is_empty() || frequencies.is_empty() {
        return Err(Error::Validation(vec!["heatmap axes must be non-empty".into()]));
    }
    let v = env.violations(fin.ray_positions.len());
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let jobs: Vec<(usize, usize)> = (0..wavelengths.len())
        .flat_map(|i| (0..frequencies.len()).map(move |j| (i, j)))
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(i, j)| heatmap_cell(fin, template, env, wavelengths[i], frequencies[j], options))
            .collect::<Vec<_>>()
    };
    let flat = with_workers(options.workers, run)?;
    let mut it = flat.into_iter();
    let cells = (0..wavelengths.len())
        .map(|_| it.by_ref().take(frequencies.len()).collect())
        .collect();
    Ok(HeatmapGrid {
        wavelengths: wavelengths.to_vec(),
        frequencies: frequencies.to_vec(),
        cells,
    })
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Samples of the fin edge along the fin at the frame nearest `t`, by
/// monotone cubic interpolation through the ray tips.
pub fn edge_profile(field: &FinField, t: f64) -> Result<Vec<(f64, f64)>> {
    let duration = field.duration();
    if field.frames.is_empty() || !(0.0..=duration).contains(&t) {
        return Err(Error::Domain(format!("time {t} s outside [0, {duration}] s")));
    }
    let frame = &field.frames[((t / field.dt).round() as usize).min(field.frames.len() - 1)];
    let xs = &field.ray_positions;
    let samples = 100;
    if xs.len() == 1 {
        return Ok((0..samples).map(|_| (xs[0], frame[0])).collect());
    }
    let interp = Pchip::new(xs, frame);
    let (a, b) = (xs[0], xs[xs.len() - 1]);
    Ok((0..samples)
        .map(|k| {
            let x = a + (b - a) * k as f64 / (samples - 1) as f64;
            (x, interp.eval(x))
        })
        .collect())
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slopes.
struct Pchip<'a> {
    x: &'a [f64],
    y: &'a [f64],
    d: Vec<f64>,
}

impl<'a> Pchip<'a> {
    fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { x, y, d }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.iter().rposition(|&xi| xi <= x) {
            None => 0,
            Some(i) => i.min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.y[i]
            + (t3 - 2.0 * t2 + t) * h * self.d[i]
            + (-2.0 * t3 + 3.0 * t2) * self.y[i + 1]
            + (t3 - t2) * h * self.d[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::{simulate_ray, RayState};
    use crate::gait::{Direction, EnvelopeShape};
    use crate::model::{preset, PresetName};
    use std::f64::consts::TAU;

    fn cuttle_fin() -> FinAssemblyConfig {
        preset(PresetName::Cuttlebot).fins[0].clone()
    }

    fn plan(lambda: f64, f: f64) -> WavePlan {
        WavePlan::sine(0.212, lambda, f, Direction::Backward)
    }

    #[test]
    fn uncoupled_rays_match_single_ray() {
        let mut fin = cuttle_fin();
        fin.coupling_stiffness = 0.0;
        fin.coupling_damping = 0.0;
        let p = plan(0.21, 2.0);
        let env = EnvelopeSpec::shaped(EnvelopeShape::Diamond, 4, 0.2);
        let field = simulate_fin(&fin, &p, &env, 5.0, 1e-3).unwrap();
        let phases = crate::gait::ray_phases(&fin.ray_positions, p.wavelength, p.direction);
        for i in 0..4 {
            let rest = static_deflection(0.0, &fin.ray).stroke;
            let single = simulate_ray(
                &fin.ray,
                RayState { stroke: rest, ..RayState::default() },
                5.0,
                1e-3,
                |t| drive_current(t, &p, phases[i], env.per_ray_power[i]),
            )
            .unwrap();
            for (n, s) in single.samples.iter().enumerate() {
                assert!((s.tip_deflection - field.frames[n][i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coupling_forces_cancel() {
        let mut out = vec![0.0; 4];
        let strokes = [0.0019, -0.0013, 0.0002, -0.002];
        let velocities = [0.03, -0.01, 0.2, -0.07];
        let link = Link { stiffness: 2.0 * 11.75 * 11.75, damping: 0.5 * 11.75 * 11.75 };
        coupling_forces(&strokes, &velocities, link, &mut out);
        assert!(out.iter().sum::<f64>().abs() < 1e-12);
        // Free ends: a single neighbour each.
        let first = link.stiffness * (strokes[1] - strokes[0]) + link.damping * (velocities[1] - velocities[0]);
        assert_eq!(out[0], first);
    }

    #[test]
    fn longer_run_repeats_prefix_exactly() {
        let fin = cuttle_fin();
        let env = EnvelopeSpec::uniform(4);
        let a = simulate_fin(&fin, &plan(0.3675, 1.75), &env, 6.0, 1e-3).unwrap();
        let b = simulate_fin(&fin, &plan(0.3675, 1.75), &env, 12.0, 1e-3).unwrap();
        assert_eq!(a.frames[..], b.frames[..a.frames.len()]);
    }

    #[test]
    fn zero_drive_stays_at_rest() {
        let fin = cuttle_fin();
        let mut p = plan(0.2, 1.0);
        p.current_amplitude = 0.0;
        let field = simulate_fin(&fin, &p, &EnvelopeSpec::uniform(4), 10.0, 1e-3).unwrap();
        let rest = tip_from_stroke(static_deflection(0.0, &fin.ray).stroke, 11.75);
        assert!(field.frames.iter().flatten().all(|&u| u == rest));
    }

    #[test]
    fn timing_preconditions() {
        let fin = cuttle_fin();
        let env = EnvelopeSpec::uniform(4);
        assert!(simulate_fin(&fin, &plan(0.2, 2.0), &env, 4.0, 1e-3).is_err());
        assert!(simulate_fin(&fin, &plan(0.2, 2.0), &env, 10.0, 0.011).is_err());
        assert!(simulate_fin(&fin, &plan(0.2, 2.0), &EnvelopeSpec::uniform(3), 10.0, 1e-3).is_err());
    }

    #[test]
    fn stiffer_membrane_keeps_neighbours_closer() {
        let env = EnvelopeSpec::uniform(4);
        let p = plan(0.21, 1.5);
        let mean_gap = |kc: f64| {
            let mut fin = cuttle_fin();
            fin.coupling_stiffness = kc;
            let field = simulate_fin(&fin, &p, &env, 10.0, 1e-3).unwrap();
            let half = field.frames.len() / 2;
            let frames = &field.frames[half..];
            frames
                .iter()
                .map(|f| f.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>())
                .sum::<f64>()
                / frames.len() as f64
        };
        let gaps: Vec<f64> = [0.0, 1.0, 5.0].into_iter().map(mean_gap).collect();
        assert!(gaps[1] <= gaps[0] && gaps[2] <= gaps[1], "{gaps:?}");
    }

    #[test]
    fn single_cell_heatmap_equals_direct_run() {
        let fin = cuttle_fin();
        let env = EnvelopeSpec::uniform(4);
        let opts = HeatmapOptions::default();
        let grid = amplitude_heatmap(&fin, &[0.2625], &[2.0], &plan(1.0, 1.0), &env, &opts).unwrap();
        let dt = cell_dt(2.0, opts.max_dt);
        let field = simulate_fin(&fin, &plan(0.2625, 2.0), &env, 6.0, dt).unwrap();
        assert_eq!(grid.cells[0][0].peak_to_peak, Some(field.max_peak_to_peak(2.0).unwrap()));
        assert!(grid.to_csv().starts_with("lambda_m,freq_hz,pkpk_m,swi\n"));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let fin = cuttle_fin();
        let env = EnvelopeSpec::uniform(4);
        let opts = |workers| HeatmapOptions { workers, ..HeatmapOptions::default() };
        let l = [0.105, 0.21, 0.315];
        let f = [1.0, 2.5, 4.0];
        let a = amplitude_heatmap(&fin, &l, &f, &plan(1.0, 1.0), &env, &opts(1)).unwrap();
        let b = amplitude_heatmap(&fin, &l, &f, &plan(1.0, 1.0), &env, &opts(4)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn empty_axis_rejected() {
        let fin = cuttle_fin();
        let env = EnvelopeSpec::uniform(4);
        let r = amplitude_heatmap(&fin, &[], &[1.0], &plan(1.0, 1.0), &env, &HeatmapOptions::default());
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn failing_cell_is_recorded() {
        let fin = cuttle_fin();
        let env = EnvelopeSpec::uniform(4);
        let opts = HeatmapOptions { cycles: 4, ..HeatmapOptions::default() };
        let grid = amplitude_heatmap(&fin, &[0.2], &[1.0], &plan(1.0, 1.0), &env, &opts).unwrap();
        assert!(grid.cells[0][0].error.is_some());
        assert!(grid.peak().is_none());
    }

    fn field_of(positions: Vec<f64>, frame: Vec<f64>) -> FinField {
        FinField::new(positions, 0.01, vec![frame; 3])
    }

    #[test]
    fn flat_edge() {
        let p = edge_profile(&field_of(vec![0.0, 0.035, 0.07, 0.105], vec![0.004; 4]), 0.01).unwrap();
        assert_eq!(p.len(), 100);
        assert!(p.iter().all(|&(_, u)| (u - 0.004).abs() < 1e-15));
    }

    #[test]
    fn two_rays_interpolate_linearly() {
        let p = edge_profile(&field_of(vec![0.0, 0.1], vec![0.0, 0.01]), 0.0).unwrap();
        for &(x, u) in &p {
            assert!((u - 0.1 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_edge_extrema_between_bracketing_rays() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * 0.035).collect();
        let lambda = 0.245;
        let frame: Vec<f64> = xs.iter().map(|&x| (TAU * x / lambda).sin()).collect();
        let field = field_of(xs.clone(), frame.clone());
        let profile = edge_profile(&field, 0.0).unwrap();
        // Monotone interpolation: each interval stays within its end values.
        for &(x, u) in &profile {
            let i = xs.iter().rposition(|&xi| xi <= x).unwrap().min(xs.len() - 2);
            let (lo, hi) = (frame[i].min(frame[i + 1]), frame[i].max(frame[i + 1]));
            assert!(u >= lo - 1e-12 && u <= hi + 1e-12);
            // Close to the underlying sine where sampling is dense enough.
            assert!((u - (TAU * x / lambda).sin()).abs() < 0.25);
        }
    }

    #[test]
    fn edge_profile_out_of_range() {
        let field = field_of(vec![0.0, 0.1], vec![0.0, 0.0]);
        assert!(edge_profile(&field, 1.0).is_err());
        assert!(edge_profile(&field, -0.1).is_err());
    }
}
