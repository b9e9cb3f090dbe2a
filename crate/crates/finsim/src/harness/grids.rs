//! Drive levels and sweep axes of the bench and tank experiments.

/// Largest current before the coil reaches its travel limit.
pub const DRIVE_CURRENT: f64 = 0.212;
/// Probe above [`DRIVE_CURRENT`] used to confirm saturation.
pub const SATURATION_PROBE_CURRENT: f64 = 0.250;
/// Tip weights of the loaded-ray tests, kg.
pub const TIP_LOADS: [f64; 5] = [0.0, 116e-6, 333e-6, 396e-6, 667e-6];
pub const HEAVIEST_LOAD: f64 = 667e-6;
/// Drive periods per frequency of a Bode sweep.
pub const BODE_CYCLES: usize = 20;
pub const STEP_DURATION: f64 = 2.0;
/// Wavelength of the surge and yaw operating points.
pub const SWIM_WAVELENGTH: f64 = 0.2625;
pub const SWIM_FREQUENCY: f64 = 2.0;
pub const YAW_FREQUENCY: f64 = 1.5;
/// Shortest swim simulated, s.
pub const MIN_SWIM_DURATION: f64 = 10.0;

fn range(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

/// 0.5 to 15 Hz in 0.25 Hz steps.
pub fn bode_frequencies() -> Vec<f64> {
    range(0.5, 0.25, 59)
}

/// 52.5 mm to 420 mm in 52.5 mm steps (half to four fin lengths).
pub fn fin_wavelengths() -> Vec<f64> {
    // Built from decimal text so 367.5 mm is the same double as a parsed "367.5 mm".
    (1..=8)
        .map(|i| format!("{}e-4", 525 * i).parse().expect("decimal literal"))
        .collect()
}

/// 0.5 to 7 Hz in 0.25 Hz steps.
pub fn fin_frequencies() -> Vec<f64> {
    range(0.5, 0.25, 27)
}

/// 0.5 to 4 Hz in 0.25 Hz steps.
pub fn swim_frequencies() -> Vec<f64> {
    range(0.5, 0.25, 15)
}

/// Currents of the static deflection curve, 0 to 300 mA in 4 mA steps.
pub fn static_currents() -> Vec<f64> {
    (0..=75).map(|i| i as f64 * 4e-3).collect()
}

pub fn swim_duration(frequency: f64) -> f64 {
    (20.0 / frequency).max(MIN_SWIM_DURATION)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes() {
        let l = fin_wavelengths();
        assert_eq!(l.len(), 8);
        assert_eq!(l[0], 0.0525);
        assert_eq!(l[6], 0.3675);
        assert_eq!(l[4], SWIM_WAVELENGTH);
        assert_eq!(fin_frequencies().len(), 27);
        assert_eq!(*fin_frequencies().last().unwrap(), 7.0);
        assert_eq!(*bode_frequencies().last().unwrap(), 15.0);
        assert_eq!(fin_frequencies()[5], 1.75);
    }
}
