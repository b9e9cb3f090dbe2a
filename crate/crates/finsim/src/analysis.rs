//! Scalar characterisation metrics from simulated series and fin fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::actuator::{GainCurve, TimeSeries};
use crate::error::{Error, Result};
use crate::fin::FinField;

/// Half-width of the settling band, as a fraction of the step size.
pub const SETTLING_BAND: f64 = 0.05;

/// Minimum number of drive periods in a steady-state window.
pub const MIN_STEADY_PERIODS: f64 = 5.0;

/// Agreement required between peak-to-peak and Fourier amplitudes.
pub const AMPLITUDE_CROSS_CHECK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    pub rise_time_10_90: f64,
    /// Largest excursion past the final value, in the step direction.
    pub overshoot: f64,
    /// Time from the series start until the response stays within the band.
    pub settling_time: f64,
    pub peak_tip_speed: f64,
}

pub fn step_metrics(series: &TimeSeries) -> Result<StepMetrics> {
    let y = series.tips();
    let t: Vec<f64> = series.samples.iter().map(|s| s.time).collect();
    if y.len() < 20 {
        return Err(Error::Analysis("series too short for step metrics".into()));
    }
    let (lo, hi) = min_max(&y);
    let span = hi - lo;
    let tail = &y[y.len() - (y.len() / 10).max(2)..];
    let (tail_lo, tail_hi) = min_max(tail);
    if span == 0.0 {
        return Err(Error::Analysis("no step transition in series".into()));
    }
    if tail_hi - tail_lo >= 0.01 * span {
        return Err(Error::Analysis("unsettled series".into()));
    }

    let initial = y[0];
    let last = *y.last().expect("non-empty");
    let step = last - initial;
    if step.abs() < 0.01 * span {
        return Err(Error::Analysis("no step transition in series".into()));
    }
    let dir = step.signum();
    let final_value = last;

    let t10 = first_crossing(&t, &y, initial + 0.1 * step, dir)
        .ok_or_else(|| Error::Analysis("no 10% crossing".into()))?;
    let t90 = first_crossing(&t, &y, initial + 0.9 * step, dir)
        .ok_or_else(|| Error::Analysis("no 90% crossing".into()))?;

    let overshoot = y
        .iter()
        .map(|&v| dir * (v - final_value))
        .fold(0.0, f64::max);

    let band = SETTLING_BAND * step.abs();
    // Last exit from the band, interpolated between samples.
    let settling_time = match y.iter().rposition(|&v| (v - final_value).abs() > band) {
        None => 0.0,
        Some(i) if i + 1 < y.len() => {
            let (e0, e1) = ((y[i] - final_value).abs(), (y[i + 1] - final_value).abs());
            t[i] + (e0 - band) / (e0 - e1) * (t[i + 1] - t[i]) - t[0]
        }
        Some(i) => t[i] - t[0],
    };

    let mut peak_speed = 0.0f64;
    for i in 0..y.len() {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(y.len() - 1));
        let v = (y[b] - y[a]) / (t[b] - t[a]);
        peak_speed = peak_speed.max(v.abs());
    }

    Ok(StepMetrics {
        rise_time_10_90: t90 - t10,
        overshoot,
        settling_time: settling_time.max(t90 - t10),
        peak_tip_speed: peak_speed,
    })
}

/// Interpolated time at which `y` first reaches `level` moving in direction `dir`.
fn first_crossing(t: &[f64], y: &[f64], level: f64, dir: f64) -> Option<f64> {
    if dir * (y[0] - level) >= 0.0 {
        return Some(t[0]);
    }
    for i in 1..y.len() {
        if dir * (y[i] - level) >= 0.0 {
            let frac = (level - y[i - 1]) / (y[i] - y[i - 1]);
            return Some(t[i - 1] + frac * (t[i] - t[i - 1]));
        }
    }
    None
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyAmplitude {
    /// Peak-to-peak over the last half of the series.
    pub peak_to_peak: f64,
    /// Twice the magnitude of the drive-frequency component.
    pub fourier_peak_to_peak: f64,
}

impl SteadyAmplitude {
    /// Whether the waveform is close enough to a pure sinusoid for the two
    /// estimates to agree.
    pub fn consistent(&self) -> bool {
        let scale = self.peak_to_peak.max(self.fourier_peak_to_peak);
        scale == 0.0
            || (self.peak_to_peak - self.fourier_peak_to_peak).abs() <= AMPLITUDE_CROSS_CHECK * scale
    }
}

pub fn steady_amplitude(series: &TimeSeries, drive_frequency: f64) -> Result<SteadyAmplitude> {
    let y = series.tips();
    steady_amplitude_of(&y, series.dt, drive_frequency)
}

/// [`steady_amplitude`] on a bare uniformly sampled signal.
pub fn steady_amplitude_of(y: &[f64], dt: f64, drive_frequency: f64) -> Result<SteadyAmplitude> {
    let window = steady_window(y, dt, drive_frequency)?;
    let (lo, hi) = min_max(window);
    let z = demodulate(integer_periods(window, dt, drive_frequency), dt, drive_frequency);
    Ok(SteadyAmplitude {
        peak_to_peak: hi - lo,
        fourier_peak_to_peak: 2.0 * z.norm(),
    })
}

/// The last half of `y`, checked to span enough drive periods.
fn steady_window(y: &[f64], dt: f64, drive_frequency: f64) -> Result<&[f64]> {
    if !(drive_frequency > 0.0) {
        return Err(Error::Analysis("drive frequency must be > 0".into()));
    }
    let start = y.len() / 2;
    let window = &y[start..];
    let periods = window.len() as f64 * dt * drive_frequency;
    if periods < MIN_STEADY_PERIODS - 1e-6 {
        return Err(Error::Analysis(format!(
            "steady window spans {periods:.2} periods, need {MIN_STEADY_PERIODS}"
        )));
    }
    Ok(window)
}

/// Trailing part of `y` covering a whole number of drive periods.
fn integer_periods(y: &[f64], dt: f64, drive_frequency: f64) -> &[f64] {
    let per_period = 1.0 / (drive_frequency * dt);
    let periods = ((y.len() as f64) / per_period + 1e-9).floor().max(1.0);
    let n = ((periods * per_period).round() as usize).clamp(3, y.len());
    &y[y.len() - n..]
}

/// Complex amplitude `z` of the drive-frequency component, `y ≈ c + Re(z·e^{iωt})`,
/// by least squares on {1, cos ωt, sin ωt}. Time is measured from the first sample.
pub fn demodulate(y: &[f64], dt: f64, drive_frequency: f64) -> Complex64 {
    let omega = 2.0 * PI * drive_frequency;
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (n, &v) in y.iter().enumerate() {
        let (s, c) = (omega * n as f64 * dt).sin_cos();
        let row = [1.0, c, s];
        for i in 0..3 {
            aty[i] += row[i] * v;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    match solve3(ata, aty) {
        // c·cos − s·sin pairing: Re(z e^{iωt}) = Re z cos ωt − Im z sin ωt.
        Some([_, a, b]) => Complex64::new(a, -b),
        None => Complex64::new(0.0, 0.0),
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// First downward crossing of the −3 dB gain, linearly interpolated.
pub fn cutoff_frequency(curve: &GainCurve) -> Result<f64> {
    let level = std::f64::consts::FRAC_1_SQRT_2;
    curve
        .entries
        .windows(2)
        .find(|w| w[0].normalized_gain >= level && w[1].normalized_gain < level)
        .map(|w| {
            let (f0, g0) = (w[0].frequency, w[0].normalized_gain);
            let (f1, g1) = (w[1].frequency, w[1].normalized_gain);
            f0 + (g0 - level) / (g0 - g1) * (f1 - f0)
        })
        .ok_or_else(|| Error::Analysis("cutoff out of band".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveDecomposition {
    /// Wave travelling toward increasing ray position.
    pub forward_amplitude: f64,
    pub backward_amplitude: f64,
    /// `min/max` of the two amplitudes; `None` when the fit is degenerate.
    pub standing_wave_index: Option<f64>,
    /// The two wave bases are (nearly) collinear on this ray layout.
    pub degenerate: bool,
}

/// Split the steady motion of the rays into two counter-propagating waves of
/// wavenumber `2π/λ`.
pub fn wave_decompose(field: &FinField, drive_frequency: f64, wavelength: f64) -> Result<WaveDecomposition> {
    let rays = field.ray_positions.len();
    if rays < 3 {
        return Err(Error::Analysis(format!("need at least 3 rays, got {rays}")));
    }
    if !(wavelength > 0.0) {
        return Err(Error::Analysis("wavelength must be > 0".into()));
    }
    let phasors = (0..rays)
        .map(|i| {
            let u = field.ray_series(i);
            let window = steady_window(&u, field.dt, drive_frequency)?;
            Ok(demodulate(integer_periods(window, field.dt, drive_frequency), field.dt, drive_frequency))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_counter_waves(&field.ray_positions, &phasors, wavelength))
}

/// Least-squares `z_i ≈ F·e^{−ikx_i} + B·e^{ikx_i}`.
pub fn fit_counter_waves(positions: &[f64], phasors: &[Complex64], wavelength: f64) -> WaveDecomposition {
    let k = 2.0 * PI / wavelength;
    let n = positions.len() as f64;
    let fwd: Vec<Complex64> = positions.iter().map(|&x| Complex64::from_polar(1.0, -k * x)).collect();
    // Gram matrix [[n, g], [conj g, n]] with g = Σ conj(f_i)·b_i = Σ e^{2ikx_i}.
    let g: Complex64 = fwd.iter().map(|f| f.conj() * f.conj()).sum();
    let det = n * n - g.norm_sqr();
    let degenerate = det <= 1e-9 * n * n;

    let rhs_f: Complex64 = fwd.iter().zip(phasors).map(|(f, z)| f.conj() * z).sum();
    let rhs_b: Complex64 = fwd.iter().zip(phasors).map(|(f, z)| f * z).sum();
    let (forward, backward) = if degenerate {
        // Collinear bases: attribute the motion equally; amplitudes are not identifiable.
        (rhs_f / (2.0 * n), rhs_b / (2.0 * n))
    } else {
        (
            (n * rhs_f - g * rhs_b) / det,
            (n * rhs_b - g.conj() * rhs_f) / det,
        )
    };
    let (a, b) = (forward.norm(), backward.norm());
    let index = if degenerate {
        None
    } else if a.max(b) > 0.0 {
        Some(a.min(b) / a.max(b))
    } else {
        Some(0.0)
    };
    WaveDecomposition {
        forward_amplitude: a,
        backward_amplitude: b,
        standing_wave_index: index,
        degenerate,
    }
}
