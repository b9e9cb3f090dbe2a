//! Batch experiments: one document describes a sweep, the runner writes its
//! data, a plot, a summary and a metadata sidecar into an output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::actuator::{frequency_response, static_deflection, step_response, DEFAULT_DT};
use crate::analysis::{cutoff_frequency, step_metrics};
use crate::error::{Error, Result};
use crate::fin::{amplitude_heatmap, with_workers, HeatmapGrid, HeatmapOptions};
use crate::gait::{combined_power_fraction, Direction, EnvelopeShape, EnvelopeSpec, WavePlan};
use crate::hydro::{simulate_swim, swim_metrics, FinDrive, Metrics, RECTIFIED_SINE_CORRECTION};
use crate::model::{load_robot_config_file, membrane_rig, preset, PresetName, RobotConfig};
use crate::table::{num, Table};
use crate::units::de_si;

use super::grids::*;
use super::modes::{swim_mode, SwimMode};
use super::stages::{fin_map_quantities, interpolated_peak};
use super::svg::{heatmap, line_plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Step,
    Bode,
    Heatmap,
    SwimMap,
    YawMap,
    SwayMap,
    HeaveMap,
    Envelope,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Step => "step",
            ExperimentKind::Bode => "bode",
            ExperimentKind::Heatmap => "heatmap",
            ExperimentKind::SwimMap => "swim-map",
            ExperimentKind::YawMap => "yaw-map",
            ExperimentKind::SwayMap => "sway-map",
            ExperimentKind::HeaveMap => "heave-map",
            ExperimentKind::Envelope => "envelope",
        }
    }

    fn default_config(self) -> PresetName {
        match self {
            ExperimentKind::Step | ExperimentKind::Bode => PresetName::SingleRay,
            _ => PresetName::Cuttlebot,
        }
    }
}

macro_rules! optional {
    ($($name:ident => $inner:path;)*) => {
        $(
            fn $name<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
                $inner(d).map(Some)
            }
        )*
    };
}

optional! {
    opt_lengths => de_si::length_list;
    opt_frequencies => de_si::frequency_list;
    opt_masses => de_si::mass_list;
    opt_fractions => de_si::dimensionless_list;
}

fn opt_current<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    de_si::current(d).map(Some)
}

fn opt_time<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    de_si::time(d).map(Some)
}

fn opt_length<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    de_si::length(d).map(Some)
}

fn opt_frequency<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    de_si::frequency(d).map(Some)
}

/// One experiment. Omitted axes and settings take the standard values of
/// the kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Preset name or path to a robot document.
    #[serde(default)]
    pub config: Option<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default, deserialize_with = "opt_lengths")]
    pub wavelengths: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "opt_frequencies")]
    pub frequencies: Option<Vec<f64>>,
    /// Tip weights for the Bode sweep.
    #[serde(default, deserialize_with = "opt_masses")]
    pub loads: Option<Vec<f64>>,
    /// Total power fractions for the envelope sweep.
    #[serde(default, deserialize_with = "opt_fractions")]
    pub power_levels: Option<Vec<f64>>,
    #[serde(default)]
    pub envelopes: Option<Vec<EnvelopeShape>>,
    #[serde(default, deserialize_with = "opt_current")]
    pub current: Option<f64>,
    /// Operating point of the envelope sweep.
    #[serde(default, deserialize_with = "opt_length")]
    pub wavelength: Option<f64>,
    #[serde(default, deserialize_with = "opt_frequency")]
    pub frequency: Option<f64>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default, deserialize_with = "opt_time")]
    pub max_dt: Option<f64>,
    /// Step length, or swim length overriding the frequency-dependent default.
    #[serde(default, deserialize_with = "opt_time")]
    pub duration: Option<f64>,
    /// Reserved for stochastic extensions; every current kind is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            config: None,
            out: None,
            wavelengths: None,
            frequencies: None,
            loads: None,
            power_levels: None,
            envelopes: None,
            current: None,
            wavelength: None,
            frequency: None,
            workers: None,
            max_dt: None,
            duration: None,
            seed: 0,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let axes: [(&str, &Option<Vec<f64>>); 4] = [
            ("wavelengths", &self.wavelengths),
            ("frequencies", &self.frequencies),
            ("loads", &self.loads),
            ("power_levels", &self.power_levels),
        ];
        for (name, axis) in axes {
            match axis {
                Some(a) if a.is_empty() => v.push(format!("{name} must not be empty")),
                Some(a) if a.iter().any(|x| !x.is_finite()) => v.push(format!("{name} must be finite")),
                _ => {}
            }
        }
        let positive: [(&str, &Option<Vec<f64>>); 2] = [("wavelengths", &self.wavelengths), ("frequencies", &self.frequencies)];
        for (name, axis) in positive {
            if axis.as_ref().is_some_and(|a| a.iter().any(|&x| x <= 0.0)) {
                v.push(format!("{name} must be positive"));
            }
        }
        if let Some(a) = &self.frequencies {
            if a.windows(2).any(|w| w[1] <= w[0]) {
                v.push("frequencies must be strictly increasing".into());
            }
        }
        if self.loads.as_ref().is_some_and(|a| a.iter().any(|&m| m < 0.0)) {
            v.push("loads must be non-negative".into());
        }
        if self
            .power_levels
            .as_ref()
            .is_some_and(|a| a.iter().any(|&p| !(0.0..=1.0).contains(&p)))
        {
            v.push("power_levels must lie in [0, 1]".into());
        }
        if self.envelopes.as_ref().is_some_and(|e| e.is_empty()) {
            v.push("envelopes must not be empty".into());
        }
        if self.workers == Some(0) {
            v.push("workers must be ≥ 1".into());
        }
        for (name, x) in [
            ("max_dt", self.max_dt),
            ("duration", self.duration),
            ("current", self.current),
            ("wavelength", self.wavelength),
            ("frequency", self.frequency),
        ] {
            if x.is_some_and(|x| !(x.is_finite() && x > 0.0)) {
                v.push(format!("{name} must be positive"));
            }
        }
        v
    }

    fn workers(&self) -> usize {
        self.workers.unwrap_or(1)
    }

    fn max_dt(&self) -> f64 {
        self.max_dt.unwrap_or(DEFAULT_DT)
    }

    fn current(&self) -> f64 {
        self.current.unwrap_or(DRIVE_CURRENT)
    }

    fn wavelengths(&self) -> Vec<f64> {
        self.wavelengths.clone().unwrap_or_else(fin_wavelengths)
    }
}

/// Parse an experiment document (TOML or JSON).
pub fn load_experiment_spec(text: &str) -> Result<ExperimentSpec> {
    let value = crate::model::parse_document(text)?;
    let spec: ExperimentSpec = crate::model::from_value(value)?;
    let v = spec.violations();
    if v.is_empty() {
        Ok(spec)
    } else {
        Err(Error::Validation(v))
    }
}

/// Resolve a preset name or a path to a robot document.
pub fn resolve_config(reference: &str) -> Result<RobotConfig> {
    match reference.parse::<PresetName>() {
        Ok(name) => Ok(preset(name)),
        Err(_) if Path::new(reference).exists() => load_robot_config_file(Path::new(reference)),
        Err(e) => Err(e),
    }
}

/// Files produced by one experiment, name to contents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub files: BTreeMap<String, String>,
    /// Scalar results, also written as `summary.csv`.
    pub summary: BTreeMap<String, f64>,
}

impl ExperimentOutput {
    fn add(&mut self, name: &str, contents: String) {
        self.files.insert(name.to_string(), contents);
    }

    fn set(&mut self, quantity: &str, value: f64) {
        self.summary.insert(quantity.to_string(), value);
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn summary_csv(summary: &BTreeMap<String, f64>) -> String {
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in summary {
        t.row(&[k.clone(), num(*v)]);
    }
    t.render()
}

/// Measurement choices that a reader of the data cannot infer from it.
fn conventions(kind: ExperimentKind) -> serde_json::Value {
    use serde_json::json;
    match kind {
        ExperimentKind::Step => json!({
            "rise": "10-90% of the final stroke",
            "settling_band": "5% of the final stroke",
        }),
        ExperimentKind::Bode => json!({
            "gain": "dynamic peak-to-peak over static peak-to-peak at the same current",
            "cutoff": "first downward -3 dB crossing, linearly interpolated",
        }),
        ExperimentKind::Heatmap => json!({
            "amplitude": "maximum over rays of the steady peak-to-peak tip deflection",
            "steady_window": "last half of the run",
        }),
        ExperimentKind::Envelope => json!({
            "power": "electrical; current scales with the square root of the power fraction",
            "mean_window": "last half of the run",
        }),
        _ => json!({ "mean_window": "last half of the run" }),
    }
}

/// Run `spec` against `config`; nothing is written.
pub fn run_experiment_with(spec: &ExperimentSpec, config: &RobotConfig) -> Result<ExperimentOutput> {
    let v = spec.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let mut out = ExperimentOutput::default();
    match spec.kind {
        ExperimentKind::Step => step(spec, config, &mut out)?,
        ExperimentKind::Bode => bode(spec, config, &mut out)?,
        ExperimentKind::Heatmap => fin_heatmap(spec, config, &mut out)?,
        ExperimentKind::SwimMap => swim_map(spec, config, &[SwimMode::Surge], &mut out)?,
        ExperimentKind::YawMap => swim_map(spec, config, &[SwimMode::Yaw], &mut out)?,
        ExperimentKind::SwayMap => swim_map(spec, config, &[SwimMode::Sway], &mut out)?,
        ExperimentKind::HeaveMap => swim_map(spec, config, &[SwimMode::Ascend, SwimMode::Descend], &mut out)?,
        ExperimentKind::Envelope => envelope(spec, config, &mut out)?,
    }
    out.add("summary.csv", summary_csv(&out.summary));
    let metadata = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": spec,
        "config": config,
        "conventions": conventions(spec.kind),
    });
    out.add(
        "metadata.json",
        serde_json::to_string_pretty(&metadata).expect("metadata serialises") + "\n",
    );
    Ok(out)
}

/// Resolve the config, run and write into `out_dir`, or the experiment document's own
/// output directory when `out_dir` is `None`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<ExperimentOutput> {
    let config = match &spec.config {
        Some(reference) => resolve_config(reference)?,
        None => preset(spec.kind.default_config()),
    };
    let output = run_experiment_with(spec, &config)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| spec.out.clone())
        .unwrap_or_else(|| PathBuf::from(spec.kind.label()));
    output.write_to(&dir)?;
    Ok(output)
}

fn first_ray(config: &RobotConfig) -> Result<&crate::model::RayModel> {
    config
        .fins
        .first()
        .map(|f| &f.ray)
        .ok_or_else(|| Error::Validation(vec!["no fins defined".into()]))
}

fn step(spec: &ExperimentSpec, config: &RobotConfig, out: &mut ExperimentOutput) -> Result<()> {
    let ray = first_ray(config)?;
    let current = spec.current();
    let series = step_response(ray, current, spec.duration.unwrap_or(STEP_DURATION), spec.max_dt())?;
    let m = step_metrics(&series)?;
    let pp = |i: f64| 2.0 * static_deflection(i, ray).tip.abs();
    let mut curve = Table::new(&["current_a", "pkpk_m", "saturated"]);
    let mut points = Vec::new();
    for i in static_currents() {
        let d = static_deflection(i, ray);
        curve.row(&[num(i), num(2.0 * d.tip.abs()), (d.saturated as u8).to_string()]);
        points.push((i * 1e3, 2e3 * d.tip.abs()));
    }
    let trace: Vec<(f64, f64)> = series.samples.iter().map(|s| (s.time, s.tip_deflection * 1e3)).collect();
    out.add("step.csv", series.to_csv());
    out.add("static.csv", curve.render());
    out.add("step.svg", line_plot("Step response", "time (s)", "tip deflection (mm)", &[Series::new("tip", trace)]));
    out.add(
        "static.svg",
        line_plot("Static deflection", "current (mA)", "peak-to-peak (mm)", &[Series::new("static", points)]),
    );
    out.set("rise_time", m.rise_time_10_90);
    out.set("overshoot", m.overshoot);
    out.set("settling_time", m.settling_time);
    out.set("peak_tip_speed", m.peak_tip_speed);
    out.set("peak_to_peak", pp(current));
    out.set("saturation_ratio", pp(SATURATION_PROBE_CURRENT) / pp(current));
    Ok(())
}

fn bode(spec: &ExperimentSpec, config: &RobotConfig, out: &mut ExperimentOutput) -> Result<()> {
    let ray = first_ray(config)?;
    let current = spec.current();
    let freqs = spec.frequencies.clone().unwrap_or_else(bode_frequencies);
    let loads = spec.loads.clone().unwrap_or_else(|| TIP_LOADS.to_vec());
    let mut conditions: Vec<(String, f64, crate::model::RayModel)> = loads
        .iter()
        .map(|&m| {
            let label = if m == 0.0 {
                String::new()
            } else {
                format!("_{}mg", num((m * 1e6 * 1e6).round() / 1e6))
            };
            (label, m, ray.with_load(m))
        })
        .collect();
    conditions.push(("_membrane".into(), 0.0, membrane_rig().apply(&ray.with_load(0.0))));
    let curves = with_workers(spec.workers(), || {
        conditions
            .par_iter()
            .map(|(_, _, r)| frequency_response(r, current, &freqs, BODE_CYCLES))
            .collect::<Vec<_>>()
    })?;
    let mut table = Table::new(&["condition", "load_kg", "freq_hz", "pkpk_m", "normalized_gain"]);
    let mut cutoffs = Table::new(&["condition", "load_kg", "cutoff_hz"]);
    let mut series = Vec::new();
    for ((label, m, _), curve) in conditions.iter().zip(curves) {
        let curve = curve?;
        let name = if label.is_empty() { "unloaded" } else { label.trim_start_matches('_') };
        for e in &curve.entries {
            table.row(&[name.into(), num(*m), num(e.frequency), num(e.peak_to_peak), num(e.normalized_gain)]);
        }
        let cutoff = cutoff_frequency(&curve).ok();
        cutoffs.row(&[name.into(), num(*m), cutoff.map(num).unwrap_or_default()]);
        if let Some(c) = cutoff {
            out.set(&format!("cutoff{label}"), c);
        }
        series.push(Series::new(
            name,
            curve.entries.iter().map(|e| (e.frequency, e.normalized_gain)).collect(),
        ));
    }
    out.add("bode.csv", table.render());
    out.add("cutoff.csv", cutoffs.render());
    out.add("bode.svg", line_plot("Frequency response", "frequency (Hz)", "normalized gain", &series));
    Ok(())
}

fn fin_heatmap(spec: &ExperimentSpec, config: &RobotConfig, out: &mut ExperimentOutput) -> Result<()> {
    let fin = config
        .fins
        .first()
        .ok_or_else(|| Error::Validation(vec!["no fins defined".into()]))?;
    let template = WavePlan::sine(spec.current(), SWIM_WAVELENGTH, SWIM_FREQUENCY, Direction::Backward);
    let grid = amplitude_heatmap(
        fin,
        &spec.wavelengths(),
        &spec.frequencies.clone().unwrap_or_else(fin_frequencies),
        &template,
        &EnvelopeSpec::uniform(fin.ray_positions.len()),
        &HeatmapOptions {
            max_dt: spec.max_dt(),
            workers: spec.workers(),
            ..HeatmapOptions::default()
        },
    )?;
    heatmap_outputs(&grid, out);
    Ok(())
}

fn heatmap_outputs(grid: &HeatmapGrid, out: &mut ExperimentOutput) {
    let mut peak = Table::new(&["lambda_m", "freq_hz", "pkpk_m", "swi"]);
    for (i, j) in grid.near_peak(0.01) {
        let c = &grid.cells[i][j];
        peak.row(&[
            num(grid.wavelengths[i]),
            num(grid.frequencies[j]),
            c.peak_to_peak.map(num).unwrap_or_default(),
            c.standing_wave_index.map(num).unwrap_or_default(),
        ]);
    }
    let mm = |v: Option<f64>| v.map(|x| x * 1e3);
    let values: Vec<Vec<Option<f64>>> = grid
        .cells
        .iter()
        .map(|row| row.iter().map(|c| mm(c.peak_to_peak)).collect())
        .collect();
    let lambdas_mm: Vec<f64> = grid.wavelengths.iter().map(|l| l * 1e3).collect();
    out.add("heatmap.csv", grid.to_csv());
    out.add("peak.csv", peak.render());
    out.add(
        "heatmap.svg",
        heatmap("Fin amplitude (mm)", "frequency (Hz)", "wavelength (mm)", &grid.frequencies, &lambdas_mm, &values),
    );
    if let Some((i, j, v)) = grid.peak() {
        out.set("peak_amplitude", v);
        out.set("peak_wavelength", grid.wavelengths[i]);
        out.set("peak_frequency", grid.frequencies[j]);
        if let Some(s) = grid.index(i, j) {
            out.set("peak_standing_wave_index", s);
        }
        let last = grid.frequencies.len() - 1;
        let top = (0..grid.wavelengths.len()).map(|i| grid.value(i, last)).fold(0.0, f64::max);
        out.set("highest_frequency_ratio", top / v);
    }
    if let Ok(q) = fin_map_quantities(grid) {
        for (k, v) in q {
            if v.is_finite() {
                out.set(&k, v);
            }
        }
    }
    if let (Some(c), Some((i, j, _))) = (grid.cell_at(0.0525, 2.25), grid.peak()) {
        if let (Some(s), Some(p)) = (c.standing_wave_index, grid.index(i, j)) {
            out.set("standing_wave_index_short", s);
            out.set("standing_wave_excess", s - p);
        }
    }
}

struct SwimCell {
    mode: SwimMode,
    wavelength: f64,
    frequency: f64,
    result: Result<[f64; 4]>,
}

fn swim_cell(spec: &ExperimentSpec, config: &RobotConfig, mode: SwimMode, wavelength: f64, frequency: f64) -> SwimCell {
    let result = (|| {
        let r = match spec.duration {
            None => swim_mode(config, mode, spec.current(), wavelength, frequency, spec.max_dt())?,
            Some(d) => {
                let drives = super::modes::mode_drives(config, mode, spec.current(), wavelength, frequency)?;
                simulate_swim(config, &drives, d, crate::fin::cell_dt(frequency, spec.max_dt()))?
            }
        };
        Ok([r.mean_velocity[0], r.mean_velocity[1], r.mean_velocity[2], r.mean_yaw_rate])
    })();
    SwimCell {
        mode,
        wavelength,
        frequency,
        result,
    }
}

/// Coefficient of determination of the least-squares line through `points`.
pub fn linear_r_squared(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 3 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy * sxy / (sxx * syy))
}

/// True when `y` rises to a single maximum and then falls, allowing
/// `slack` relative dips on either side.
pub fn is_unimodal(y: &[f64], slack: f64) -> bool {
    let Some((peak, &max)) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return false;
    };
    let tol = slack * max.abs();
    y[..=peak].windows(2).all(|w| w[1] >= w[0] - tol) && y[peak..].windows(2).all(|w| w[1] <= w[0] + tol)
}

fn swim_map(spec: &ExperimentSpec, config: &RobotConfig, modes: &[SwimMode], out: &mut ExperimentOutput) -> Result<()> {
    let freqs = spec.frequencies.clone().unwrap_or_else(swim_frequencies);
    let mut jobs = Vec::new();
    for &mode in modes {
        let lambdas = if mode.uses_wavelength() {
            spec.wavelengths()
        } else {
            vec![f64::INFINITY]
        };
        for &l in &lambdas {
            for &f in &freqs {
                jobs.push((mode, l, f));
            }
        }
    }
    let cells: Vec<SwimCell> = with_workers(spec.workers(), || {
        jobs.par_iter()
            .map(|&(mode, l, f)| swim_cell(spec, config, mode, l, f))
            .collect()
    })?;

    let mut table = Table::new(&[
        "mode", "lambda_m", "freq_hz", "surge_mps", "sway_mps", "heave_mps", "yaw_rate_radps", "error",
    ]);
    for c in &cells {
        let (values, error) = match &c.result {
            Ok(v) => (v.map(num).to_vec(), String::new()),
            Err(e) => (vec![String::new(); 4], e.to_string().replace(',', ";")),
        };
        let mut row = vec![c.mode.label().to_string(), num(c.wavelength), num(c.frequency)];
        row.extend(values);
        row.push(error);
        table.row(&row);
    }
    out.add("swim_map.csv", table.render());

    let lambdas: Vec<f64> = {
        let mut v: Vec<f64> = cells.iter().map(|c| c.wavelength).collect();
        v.dedup();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    for &mode in modes {
        let axis = match mode {
            SwimMode::Surge => 0,
            SwimMode::Sway => 1,
            SwimMode::Ascend | SwimMode::Descend => 2,
            SwimMode::Yaw => 3,
        };
        let value = |c: &SwimCell| match (&c.result, mode) {
            (Ok(v), SwimMode::Surge) => Some(v[axis]),
            (Ok(v), SwimMode::Descend) => Some(-v[axis]),
            (Ok(v), _) => Some(v[axis].abs()),
            (Err(_), _) => None,
        };
        let mine: Vec<&SwimCell> = cells.iter().filter(|c| c.mode == mode).collect();
        let label = mode.label();
        let Some(best) = mine
            .iter()
            .filter_map(|c| value(c).map(|v| (c, v)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            continue;
        };
        let (peak_cell, peak) = best;
        out.set(&format!("peak_{label}_speed"), peak);
        out.set(&format!("peak_{label}_frequency"), peak_cell.frequency);
        if mode.uses_wavelength() {
            out.set(&format!("peak_{label}_wavelength"), peak_cell.wavelength);
        }
        let row_of = |l: f64| -> Vec<(f64, f64)> {
            mine.iter()
                .filter(|c| c.wavelength == l)
                .filter_map(|c| value(c).map(|v| (c.frequency, v)))
                .collect()
        };
        let peak_row = row_of(peak_cell.wavelength);
        let ys: Vec<f64> = peak_row.iter().map(|p| p.1).collect();
        let xs: Vec<f64> = peak_row.iter().map(|p| p.0).collect();
        if let Some(f) = interpolated_peak(&xs, &ys) {
            out.set(&format!("peak_{label}_frequency_interpolated"), f);
        }
        out.set(&format!("{label}_unimodal"), is_unimodal(&ys, 0.02) as u8 as f64);
        let rising: Vec<(f64, f64)> = peak_row.iter().copied().filter(|p| p.0 <= 1.5 + 1e-9).collect();
        if let Some(r2) = linear_r_squared(&rising) {
            out.set(&format!("{label}_rising_r_squared"), r2);
        }
        let all: Vec<f64> = mine.iter().filter_map(|c| value(c)).collect();
        out.set(&format!("min_{label}_speed"), all.iter().copied().fold(f64::INFINITY, f64::min));
        if mode == SwimMode::Yaw {
            if let Ok(v) = &peak_cell.result {
                out.set("yaw_surge_at_peak", v[0].abs());
            }
        }

        let title = format!("{} speed", label);
        let unit = if mode == SwimMode::Yaw { "deg/s" } else { "mm/s" };
        let scale = if mode == SwimMode::Yaw { 180.0 / std::f64::consts::PI } else { 1e3 };
        if mode.uses_wavelength() && lambdas.len() > 1 {
            let values: Vec<Vec<Option<f64>>> = lambdas
                .iter()
                .map(|&l| {
                    freqs
                        .iter()
                        .map(|&f| {
                            mine.iter()
                                .find(|c| c.wavelength == l && c.frequency == f)
                                .and_then(|c| value(c))
                                .map(|v| v * scale)
                        })
                        .collect()
                })
                .collect();
            let lambdas_mm: Vec<f64> = lambdas.iter().map(|l| l * 1e3).collect();
            out.add(
                &format!("{label}_map.svg"),
                heatmap(&format!("{title} ({unit})"), "frequency (Hz)", "wavelength (mm)", &freqs, &lambdas_mm, &values),
            );
        } else {
            let pts = peak_row.iter().map(|&(f, v)| (f, v * scale)).collect();
            out.add(
                &format!("{label}_map.svg"),
                line_plot(&title, "frequency (Hz)", &format!("speed ({unit})"), &[Series::new(label, pts)]),
            );
        }
    }
    Ok(())
}

/// Power on each underpowered ray so that `shape` totals `level` of full
/// power; `None` when no such value in [0, 1] exists.
pub fn reduced_power(shape: EnvelopeShape, rays: usize, level: f64) -> Option<f64> {
    let reduced = EnvelopeSpec::shaped(shape, rays, 0.0)
        .per_ray_power
        .iter()
        .filter(|&&p| p == 0.0)
        .count();
    if reduced == 0 {
        return None;
    }
    let r = (level * rays as f64 - (rays - reduced) as f64) / reduced as f64;
    (-1e-12..=1.0 + 1e-12).contains(&r).then(|| r.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub shape: EnvelopeShape,
    pub level: f64,
    pub reduced_power: f64,
    pub total_power_fraction: f64,
    pub surge_speed: Option<f64>,
    pub metrics: Option<Metrics>,
}

/// Surge runs at one operating point under each envelope and power level,
/// plus uniform at full power.
pub fn envelope_table(spec: &ExperimentSpec, config: &RobotConfig) -> Result<Vec<EnvelopeRow>> {
    let shapes = spec.envelopes.clone().unwrap_or_else(|| EnvelopeShape::ALL.to_vec());
    let levels = spec.power_levels.clone().unwrap_or_else(|| vec![0.5, 0.6]);
    let lambda = spec.wavelength.unwrap_or(SWIM_WAVELENGTH);
    let f = spec.frequency.unwrap_or(SWIM_FREQUENCY);
    let plan = WavePlan::sine(spec.current(), lambda, f, Direction::Backward);

    let mut jobs = vec![(EnvelopeShape::Uniform, 1.0, 1.0)];
    for &level in &levels {
        for &shape in &shapes {
            let r = match shape {
                EnvelopeShape::Uniform => Some(level),
                s => config.fins.first().and_then(|fin| reduced_power(s, fin.ray_positions.len(), level)),
            };
            match r {
                Some(r) => jobs.push((shape, level, r)),
                None => {
                    return Err(Error::Domain(format!(
                        "{} cannot reach {}% total power",
                        shape.label(),
                        num(level * 100.0)
                    )))
                }
            }
        }
    }
    let duration = spec.duration.unwrap_or_else(|| swim_duration(f));
    let dt = crate::fin::cell_dt(f, spec.max_dt());
    with_workers(spec.workers(), || {
        jobs.par_iter()
            .map(|&(shape, level, r)| {
                let drives: Vec<FinDrive> = config
                    .fins
                    .iter()
                    .map(|fin| {
                        let rays = fin.ray_positions.len();
                        let envelope = match shape {
                            EnvelopeShape::Uniform => EnvelopeSpec {
                                per_ray_power: vec![r; rays],
                            },
                            s => EnvelopeSpec::shaped(s, rays, r),
                        };
                        FinDrive {
                            plan: plan.clone(),
                            envelope,
                        }
                    })
                    .collect();
                let envelopes: Vec<&EnvelopeSpec> = drives.iter().map(|d| &d.envelope).collect();
                let total = combined_power_fraction(&envelopes);
                let run = simulate_swim(config, &drives, duration, dt).and_then(|res| {
                    let m = swim_metrics(&res, &res.fin_fields[0], &plan, config, &drives, RECTIFIED_SINE_CORRECTION)?;
                    Ok((res.mean_velocity[0], m))
                });
                let (surge_speed, metrics) = match run {
                    Ok((v, m)) => (Some(v), Some(m)),
                    Err(_) => (None, None),
                };
                EnvelopeRow {
                    shape,
                    level,
                    reduced_power: r,
                    total_power_fraction: total,
                    surge_speed,
                    metrics,
                }
            })
            .collect()
    })
}

fn pct(level: f64) -> String {
    num((level * 100.0 * 1e6).round() / 1e6)
}

fn envelope(spec: &ExperimentSpec, config: &RobotConfig, out: &mut ExperimentOutput) -> Result<()> {
    let rows = envelope_table(spec, config)?;
    let mut table = Table::new(&[
        "envelope", "power_level", "reduced_power", "total_power_fraction", "surge_mps", "electrical_power_w",
    ]);
    for r in &rows {
        table.row(&[
            r.shape.label().into(),
            num(r.level),
            num(r.reduced_power),
            num(r.total_power_fraction),
            r.surge_speed.map(num).unwrap_or_default(),
            r.metrics.as_ref().map(|m| num(m.electrical_power)).unwrap_or_default(),
        ]);
    }
    out.add("envelope.csv", table.render());
    let full = rows[0].surge_speed;
    if let Some(v) = full {
        out.set("speed_uniform_100", v);
    }
    let mut series = Vec::new();
    let levels: Vec<f64> = {
        let mut l: Vec<f64> = rows[1..].iter().map(|r| r.level).collect();
        l.dedup();
        l
    };
    for &level in &levels {
        let group: Vec<&EnvelopeRow> = rows[1..].iter().filter(|r| r.level == level).collect();
        let p = pct(level);
        for r in &group {
            if let Some(v) = r.surge_speed {
                out.set(&format!("speed_{}_{p}", r.shape.label()), v);
            }
            out.set(&format!("power_fraction_{}_{p}", r.shape.label()), r.total_power_fraction);
        }
        let partial: Vec<f64> = group
            .iter()
            .filter(|r| r.total_power_fraction < 1.0)
            .filter_map(|r| r.surge_speed)
            .collect();
        if let (Some(full), false) = (full, partial.is_empty()) {
            let fastest = partial.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            out.set(&format!("partial_below_full_{p}"), (fastest < full) as u8 as f64);
        }
        let slowest = group
            .iter()
            .filter_map(|r| r.surge_speed.map(|v| (r.shape, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((shape, _)) = slowest {
            out.set(&format!("bowtie_last_{p}"), (shape == EnvelopeShape::Bowtie) as u8 as f64);
        }
        series.push(Series::new(
            format!("{p}%"),
            group
                .iter()
                .enumerate()
                .filter_map(|(k, r)| r.surge_speed.map(|v| (k as f64, v * 1e3)))
                .collect(),
        ));
    }
    let names: Vec<&str> = rows[1..]
        .iter()
        .take_while(|r| r.level == rows[1].level)
        .map(|r| r.shape.label())
        .collect();
    out.add(
        "envelope.svg",
        line_plot(
            &format!("Surge speed by envelope ({})", names.join(", ")),
            "envelope index",
            "speed (mm/s)",
            &series,
        ),
    );
    Ok(())
}

/// Swimming metrics of a surge run at one operating point.
pub fn surge_metrics(config: &RobotConfig, current: f64, wavelength: f64, frequency: f64, max_dt: f64) -> Result<Metrics> {
    let drives = super::modes::mode_drives(config, SwimMode::Surge, current, wavelength, frequency)?;
    let r = simulate_swim(config, &drives, swim_duration(frequency), crate::fin::cell_dt(frequency, max_dt))?;
    let field = r
        .fin_fields
        .first()
        .ok_or_else(|| Error::Analysis("no fin field recorded".into()))?;
    swim_metrics(&r, field, &drives[0].plan, config, &drives, RECTIFIED_SINE_CORRECTION)
}
