//! The calibration stages: actuator, membrane rig, fin, swimming.
//!
//! Each stage fits its own parameters with the earlier stages frozen, so
//! hydrodynamic parameters cannot absorb actuator error.

use crate::actuator::{frequency_response, static_peak_to_peak, step_response, DEFAULT_DT};
use crate::analysis::{cutoff_frequency, step_metrics};
use crate::error::{Error, Result};
use crate::fin::{amplitude_heatmap, with_workers, HeatmapGrid, HeatmapOptions};
use crate::gait::{Direction, EnvelopeSpec, WavePlan};
use crate::model::{CalibrationTargets, FinAssemblyConfig, MembraneRig, RayModel, RobotConfig};
use crate::optim::{Parameter, ParameterSpace, Transform};

use super::calibrate::{calibrate, target, CalibrationReport, Quantities};
use super::grids::*;
use super::modes::{swim_mode, SwimMode};

/// Parameters and targets of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub name: &'static str,
    pub space: ParameterSpace,
    pub targets: CalibrationTargets,
}

fn quantities<const N: usize>(entries: [(&str, f64); N]) -> Quantities {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Actuator stage: lumped ray dynamics against the bench measurements.
pub fn ray_stage() -> Stage {
    use Transform::Log;
    Stage {
        name: "ray",
        space: ParameterSpace::new(vec![
            Parameter::new("stiffness", 10.0, 500.0, 50.0, Log),
            Parameter::new("damping_linear", 0.01, 20.0, 1.0, Log),
            Parameter::new("damping_quadratic", 1.0, 2000.0, 100.0, Log),
            Parameter::new("effective_mass", 0.01, 2.0, 0.2, Log),
            Parameter::new("bell_width", 5e-4, 1e-2, 2.5e-3, Log),
        ]),
        targets: CalibrationTargets::new(vec![
            target("peak_to_peak", 0.047, 0.05),
            target("rise_time", 0.100, 0.20),
            target("peak_tip_speed", 0.37, 0.20),
            target("cutoff", 4.5, 0.5 / 4.5),
            target("cutoff_667mg", 4.0, 0.5 / 4.0),
            target("overshoot", 0.4e-3, 0.75),
            target("overshoot_667mg", 9.5e-3, 0.30),
            target("saturation_ratio", 1.0, 0.01),
        ]),
    }
}

pub fn apply_ray_parameters(ray: &RayModel, p: &[f64]) -> RayModel {
    let mut r = ray.clone();
    r.stiffness = p[0];
    r.damping_linear = p[1];
    r.damping_quadratic = p[2];
    r.effective_mass = p[3];
    r.vca.bell_width = p[4];
    r
}

/// Bench quantities of a bare ray, unloaded and with the heaviest tip weight.
pub fn ray_quantities(ray: &RayModel) -> Result<Quantities> {
    let ray = ray.with_load(0.0);
    let heavy = ray.with_load(HEAVIEST_LOAD);
    let step = step_metrics(&step_response(&ray, DRIVE_CURRENT, STEP_DURATION, DEFAULT_DT)?)?;
    let step_heavy = step_metrics(&step_response(&heavy, DRIVE_CURRENT, STEP_DURATION, DEFAULT_DT)?)?;
    let freqs = bode_frequencies();
    let cutoff = cutoff_frequency(&frequency_response(&ray, DRIVE_CURRENT, &freqs, BODE_CYCLES)?)?;
    let cutoff_heavy = cutoff_frequency(&frequency_response(&heavy, DRIVE_CURRENT, &freqs, BODE_CYCLES)?)?;
    let pp = static_peak_to_peak(DRIVE_CURRENT, &ray);
    Ok(quantities([
        ("peak_to_peak", pp),
        ("rise_time", step.rise_time_10_90),
        ("peak_tip_speed", step.peak_tip_speed),
        ("overshoot", step.overshoot),
        ("settling_time", step.settling_time),
        ("cutoff", cutoff),
        ("cutoff_667mg", cutoff_heavy),
        ("overshoot_667mg", step_heavy.overshoot),
        ("settling_time_667mg", step_heavy.settling_time),
        ("saturation_ratio", static_peak_to_peak(SATURATION_PROBE_CURRENT, &ray) / pp),
    ]))
}

/// Fit the actuator parameters of `ray`; its VCA force constant, travel and
/// transmission are kept.
pub fn calibrate_ray(ray: &RayModel, budget: usize) -> Result<(RayModel, CalibrationReport)> {
    let stage = ray_stage();
    let report = calibrate(&stage.space, &stage.targets, budget, |p| {
        ray_quantities(&apply_ray_parameters(ray, p))
    })?;
    let best: Vec<f64> = report.fitted.iter().map(|p| p.value).collect();
    Ok((apply_ray_parameters(ray, &best), report))
}

/// Membrane stage: the rig's stiffening and damping factors.
pub fn membrane_stage(rig: &MembraneRig) -> Stage {
    use Transform::Log;
    Stage {
        name: "membrane",
        space: ParameterSpace::new(vec![
            Parameter::new("membrane_factor", 1.0, 20.0, rig.membrane_factor, Log),
            Parameter::new("membrane_damping_factor", 0.5, 200.0, rig.membrane_damping_factor, Log),
        ]),
        targets: CalibrationTargets::new(vec![
            target("cutoff_membrane", 1.0, 0.3),
            target("rise_time_membrane", 0.4, 0.25),
        ]),
    }
}

fn rig_of(p: &[f64]) -> MembraneRig {
    MembraneRig {
        membrane_factor: p[0],
        membrane_damping_factor: p[1],
    }
}

/// Bench quantities of a ray embedded in the rig membrane.
pub fn membrane_quantities(embedded: &RayModel) -> Result<Quantities> {
    let step = step_metrics(&step_response(embedded, DRIVE_CURRENT, STEP_DURATION, DEFAULT_DT)?)?;
    let curve = frequency_response(embedded, DRIVE_CURRENT, &bode_frequencies(), BODE_CYCLES)?;
    Ok(quantities([
        ("cutoff_membrane", cutoff_frequency(&curve)?),
        ("rise_time_membrane", step.rise_time_10_90),
        ("peak_to_peak_membrane", static_peak_to_peak(DRIVE_CURRENT, embedded)),
    ]))
}

pub fn calibrate_membrane(ray: &RayModel, rig: &MembraneRig, budget: usize) -> Result<(MembraneRig, CalibrationReport)> {
    let stage = membrane_stage(rig);
    let report = calibrate(&stage.space, &stage.targets, budget, |p| {
        membrane_quantities(&rig_of(p).apply(ray))
    })?;
    let best: Vec<f64> = report.fitted.iter().map(|p| p.value).collect();
    Ok((rig_of(&best), report))
}

/// Fin stage: membrane coupling and the embedded rays' load, on the
/// amplitude map of one fin.
pub fn fin_stage(fin: &FinAssemblyConfig) -> Stage {
    use Transform::Log;
    let ray = &fin.ray;
    Stage {
        name: "fin",
        space: ParameterSpace::new(vec![
            Parameter::new("membrane_factor", 1.0, 10.0, ray.membrane_factor, Log),
            Parameter::new("membrane_damping_factor", 0.1, 10.0, ray.membrane_damping_factor, Log),
            Parameter::new("effective_mass", 0.1, 5.0, ray.effective_mass, Log),
            Parameter::new("coupling_stiffness", 0.05, 10.0, fin.coupling_stiffness.max(0.05), Log),
            Parameter::new("coupling_damping", 1e-3, 1.0, fin.coupling_damping.max(1e-3), Log),
        ]),
        targets: CalibrationTargets::new(vec![
            target("fin_peak_frequency", 1.75, 0.07),
            target("fin_amplitude_swim_point", 0.02416, 0.10),
            target("fin_velocity_peak_frequency", SWIM_FREQUENCY, 0.10),
            target("long_wave_advantage", 1.05, 0.04),
            target("standing_contrast", 2.0, 0.45),
        ]),
    }
}

/// `config` with the fin-stage parameters applied to every fin.
pub fn apply_fin_parameters(config: &RobotConfig, p: &[f64]) -> RobotConfig {
    let mut c = config.clone();
    for fin in &mut c.fins {
        fin.ray.membrane_factor = p[0];
        fin.ray.membrane_damping_factor = p[1];
        fin.ray.effective_mass = p[2];
        fin.coupling_stiffness = p[3];
        fin.coupling_damping = p[4];
    }
    c
}

/// Amplitude map of `fin` over the standard axes under a backward sine at
/// the drive current.
pub fn fin_map(fin: &FinAssemblyConfig, workers: usize) -> Result<HeatmapGrid> {
    let template = WavePlan::sine(DRIVE_CURRENT, SWIM_WAVELENGTH, SWIM_FREQUENCY, Direction::Backward);
    amplitude_heatmap(
        fin,
        &fin_wavelengths(),
        &fin_frequencies(),
        &template,
        &EnvelopeSpec::uniform(fin.ray_positions.len()),
        &HeatmapOptions {
            workers,
            ..HeatmapOptions::default()
        },
    )
}

/// Abscissa of the largest interior sample of `y`, refined by a parabola
/// through it and its neighbours.
pub fn interpolated_peak(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = y.len();
    if n < 3 {
        return None;
    }
    let j = (1..n - 1).fold(1, |best, j| if y[j] > y[best] { j } else { best });
    let (a, b, c) = (y[j - 1], y[j], y[j + 1]);
    let curvature = a - 2.0 * b + c;
    let shift = if curvature < 0.0 { 0.5 * (a - c) / curvature } else { 0.0 };
    let step = if shift >= 0.0 { x[j + 1] - x[j] } else { x[j] - x[j - 1] };
    Some(x[j] + shift * step)
}

fn index_of(axis: &[f64], value: f64) -> Result<usize> {
    axis.iter()
        .position(|&v| (v - value).abs() < 1e-9)
        .ok_or_else(|| Error::Analysis(format!("{value} is not on the grid axis")))
}

/// Fin-map features used by the fin stage.
pub fn fin_map_quantities(grid: &HeatmapGrid) -> Result<Quantities> {
    let fs = &grid.frequencies;
    let row = |i: usize| -> Vec<f64> { (0..fs.len()).map(|j| grid.value(i, j)).collect() };
    let long_row = index_of(&grid.wavelengths, 0.3675)?;
    let swim_row = index_of(&grid.wavelengths, SWIM_WAVELENGTH)?;
    let swim_col = index_of(fs, SWIM_FREQUENCY)?;
    let standing_col = index_of(fs, 2.25)?;
    let (pi, pj, _) = grid.peak().ok_or_else(|| Error::Analysis("empty fin map".into()))?;

    let peak_frequency = interpolated_peak(fs, &row(long_row)).ok_or_else(|| Error::Analysis("short axis".into()))?;
    let tip_speed: Vec<f64> = row(swim_row).iter().zip(fs).map(|(a, f)| a * f).collect();
    let velocity_peak = interpolated_peak(fs, &tip_speed).ok_or_else(|| Error::Analysis("short axis".into()))?;
    let band_max = |rows: std::ops::Range<usize>| {
        rows.flat_map(|i| (0..fs.len()).map(move |j| (i, j)))
            .map(|(i, j)| grid.value(i, j))
            .fold(0.0, f64::max)
    };
    let first_long = grid.wavelengths.iter().position(|&l| l > 0.3).unwrap_or(grid.wavelengths.len());
    let long = band_max(first_long..grid.wavelengths.len());
    let short = band_max(0..first_long);
    let standing = grid.index(0, standing_col).unwrap_or(f64::NAN);
    let at_peak = grid.index(pi, pj).unwrap_or(f64::NAN);
    Ok(quantities([
        ("fin_peak_frequency", peak_frequency),
        ("fin_amplitude_swim_point", grid.value(swim_row, swim_col)),
        ("fin_velocity_peak_frequency", velocity_peak),
        ("long_wave_advantage", long / short),
        ("standing_contrast", standing / at_peak),
        ("fin_peak_wavelength_cell", grid.wavelengths[pi]),
        ("fin_peak_frequency_cell", fs[pj]),
    ]))
}

pub fn fin_quantities(fin: &FinAssemblyConfig, workers: usize) -> Result<Quantities> {
    fin_map_quantities(&fin_map(fin, workers)?)
}

/// Fit the fin stage on the first fin and apply the result to every fin.
pub fn calibrate_fin(config: &RobotConfig, budget: usize, workers: usize) -> Result<(RobotConfig, CalibrationReport)> {
    let fin = config
        .fins
        .first()
        .ok_or_else(|| Error::Validation(vec!["no fins defined".into()]))?;
    let stage = fin_stage(fin);
    let report = calibrate(&stage.space, &stage.targets, budget, |p| {
        fin_quantities(&apply_fin_parameters(config, p).fins[0], workers)
    })?;
    let best: Vec<f64> = report.fitted.iter().map(|p| p.value).collect();
    Ok((apply_fin_parameters(config, &best), report))
}

/// Swimming stage: fin force gain and yaw drag against the tank speeds.
pub fn swim_stage(config: &RobotConfig) -> Stage {
    use Transform::Log;
    let h = &config.hydro;
    Stage {
        name: "swim",
        space: ParameterSpace::new(vec![
            Parameter::new("thrust_gain", 0.05, 20.0, h.thrust_gain, Log),
            Parameter::new("yaw_drag_coeff", 1e-7, 1e-2, h.yaw_drag_coeff, Log),
        ]),
        targets: CalibrationTargets::new(vec![
            target("surge_speed", 0.0604, 0.10),
            target("yaw_rate", 35f64.to_radians(), 0.20),
        ]),
    }
}

pub fn apply_swim_parameters(config: &RobotConfig, p: &[f64]) -> RobotConfig {
    let mut c = config.clone();
    c.hydro.thrust_gain = p[0];
    c.hydro.yaw_drag_coeff = p[1];
    c
}

/// Mean surge speed at the surge operating point and mean yaw rate
/// magnitude at the yaw operating point.
pub fn swim_quantities(config: &RobotConfig, workers: usize) -> Result<Quantities> {
    let max_dt = DEFAULT_DT;
    let (surge, yaw) = with_workers(workers, || {
        rayon::join(
            || swim_mode(config, SwimMode::Surge, DRIVE_CURRENT, SWIM_WAVELENGTH, SWIM_FREQUENCY, max_dt),
            || swim_mode(config, SwimMode::Yaw, DRIVE_CURRENT, SWIM_WAVELENGTH, YAW_FREQUENCY, max_dt),
        )
    })?;
    Ok(quantities([
        ("surge_speed", surge?.mean_velocity[0]),
        ("yaw_rate", yaw?.mean_yaw_rate.abs()),
    ]))
}

pub fn calibrate_swim(config: &RobotConfig, budget: usize, workers: usize) -> Result<(RobotConfig, CalibrationReport)> {
    let stage = swim_stage(config);
    let report = calibrate(&stage.space, &stage.targets, budget, |p| {
        swim_quantities(&apply_swim_parameters(config, p), workers)
    })?;
    let best: Vec<f64> = report.fitted.iter().map(|p| p.value).collect();
    Ok((apply_swim_parameters(config, &best), report))
}
