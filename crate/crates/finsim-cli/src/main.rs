//! `finsim`: calibrate the fin-ray models, run experiments, compare results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finsim::harness::stages::{calibrate_fin, calibrate_membrane, calibrate_ray, calibrate_swim};
use finsim::harness::{
    collect_summaries, compare_report, experiment::surge_metrics, load_experiment_spec, load_reference, resolve_config,
    run_experiment_with, CalibrationReport, ExperimentKind, ExperimentSpec,
};
use finsim::model::{membrane_rig, preset, to_json, to_toml, PresetName, RobotConfig, PRESET_NAMES};
use finsim::units::{parse_quantity, Dimension};
use finsim::Error;

#[derive(Parser)]
#[command(name = "finsim", version, about = "Fin-ray actuator and undulating-fin robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Preset name or robot document (TOML or JSON).
    #[arg(long)]
    config: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Largest integration step, e.g. "0.5 ms".
    #[arg(long, value_parser = time)]
    dt: Option<f64>,
    /// Simulated duration, e.g. "2 s".
    #[arg(long, value_parser = time)]
    duration: Option<f64>,
    /// Experiment document; flags given alongside override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Drive current amplitude, e.g. "212 mA".
    #[arg(long, value_parser = current)]
    current: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit model parameters to the bench and tank measurements.
    Calibrate {
        #[arg(long, value_enum, default_value_t = StageArg::All)]
        stage: StageArg,
        /// Objective evaluations per stage.
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Step response and static deflection curve of a single ray.
    Step(Common),
    /// Frequency response of a single ray under each tip load.
    Bode(Common),
    /// Fin amplitude over wavelength and frequency.
    Heatmap(Common),
    /// Swimming speed over wavelength and frequency in one mode.
    Swim {
        #[arg(long, value_enum, default_value_t = ModeArg::Surge)]
        mode: ModeArg,
        #[command(flatten)]
        common: Common,
    },
    /// Surge speed under the named wave envelopes at reduced power.
    Envelope(Common),
    /// Strouhal number, specific wavelength and power of one surge run.
    Metrics {
        #[arg(long, value_parser = length, default_value = "262.5 mm")]
        wavelength: f64,
        #[arg(long, value_parser = frequency, default_value = "2 Hz")]
        frequency: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Check experiment summaries against a reference document.
    Compare {
        #[arg(long)]
        reference: PathBuf,
        /// Experiment output directories or summary files.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in robot document.
    Preset {
        /// One of single-ray, cuttlebot, tuna, jellyfish; omit to list them.
        name: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Toml)]
        format: Format,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StageArg {
    Ray,
    Membrane,
    Fin,
    Swim,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Surge,
    Yaw,
    Sway,
    Heave,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Toml,
    Json,
}

fn quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    parse_quantity(text, dim)
}

fn time(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Time)
}

fn current(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Current)
}

fn length(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Length)
}

fn frequency(s: &str) -> Result<f64, String> {
    quantity(s, Dimension::Frequency)
}

/// Failure with its process exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_usage() || matches!(e, Error::Io { .. }) { 1 } else { 2 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Calibrate { stage, budget, common } => calibrate(stage, budget, &common),
        Command::Step(c) => experiment(ExperimentKind::Step, &c),
        Command::Bode(c) => experiment(ExperimentKind::Bode, &c),
        Command::Heatmap(c) => experiment(ExperimentKind::Heatmap, &c),
        Command::Envelope(c) => experiment(ExperimentKind::Envelope, &c),
        Command::Swim { mode, common } => {
            let kind = match mode {
                ModeArg::Surge => ExperimentKind::SwimMap,
                ModeArg::Yaw => ExperimentKind::YawMap,
                ModeArg::Sway => ExperimentKind::SwayMap,
                ModeArg::Heave => ExperimentKind::HeaveMap,
            };
            experiment(kind, &common)
        }
        Command::Metrics {
            wavelength,
            frequency,
            common,
        } => metrics(wavelength, frequency, &common),
        Command::Compare { reference, results, out } => compare(&reference, &results, out.as_deref()),
        Command::Preset { name, format } => print_preset(name.as_deref(), format),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

fn write(path: &Path, contents: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn config_or(common: &Common, fallback: PresetName) -> Result<RobotConfig, Failure> {
    match &common.config {
        Some(r) => Ok(resolve_config(r)?),
        None => Ok(preset(fallback)),
    }
}

fn experiment(kind: ExperimentKind, c: &Common) -> Outcome {
    let mut spec = match &c.spec {
        Some(path) => load_experiment_spec(&read(path)?)?,
        None => ExperimentSpec::new(kind),
    };
    let swim_kinds = [
        ExperimentKind::SwimMap,
        ExperimentKind::YawMap,
        ExperimentKind::SwayMap,
        ExperimentKind::HeaveMap,
    ];
    let compatible = spec.kind == kind || (swim_kinds.contains(&kind) && swim_kinds.contains(&spec.kind) && c.spec.is_some());
    if !compatible {
        return Err(usage(format!(
            "experiment document is of kind '{}', not '{}'",
            spec.kind.label(),
            kind.label()
        )));
    }
    if c.config.is_some() {
        spec.config = c.config.clone();
    }
    spec.workers = c.workers.or(spec.workers);
    spec.max_dt = c.dt.or(spec.max_dt);
    spec.duration = c.duration.or(spec.duration);
    spec.current = c.current.or(spec.current);
    let out_dir = c
        .out
        .clone()
        .or_else(|| spec.out.clone())
        .unwrap_or_else(|| PathBuf::from(spec.kind.label()));
    let config = match &spec.config {
        Some(r) => resolve_config(r)?,
        None => preset(match spec.kind {
            ExperimentKind::Step | ExperimentKind::Bode => PresetName::SingleRay,
            _ => PresetName::Cuttlebot,
        }),
    };
    let output = run_experiment_with(&spec, &config)?;
    output.write_to(&out_dir)?;
    print!("{}", output.files["summary.csv"]);
    Ok(())
}

fn metrics(wavelength: f64, frequency: f64, c: &Common) -> Outcome {
    let config = config_or(c, PresetName::Cuttlebot)?;
    let m = surge_metrics(
        &config,
        c.current.unwrap_or(finsim::harness::grids::DRIVE_CURRENT),
        wavelength,
        frequency,
        c.dt.unwrap_or(finsim::actuator::DEFAULT_DT),
    )?;
    let csv = m.to_csv();
    if let Some(dir) = &c.out {
        write(&dir.join("metrics.csv"), &csv)?;
    }
    print!("{csv}");
    Ok(())
}

fn report_line(stage: &str, r: &CalibrationReport) {
    eprintln!(
        "{stage}: objective {} after {} evaluations, {}",
        r.objective,
        r.evaluations,
        if r.converged { "converged" } else { "not converged" }
    );
}

fn calibrate(stage: StageArg, budget: Option<usize>, c: &Common) -> Outcome {
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("calibration"));
    let workers = c.workers.unwrap_or(1);
    let runs = |s| matches!(stage, StageArg::All) || stage == s;
    let mut converged = true;
    let single = match stage {
        StageArg::All => preset(PresetName::SingleRay),
        _ => config_or(c, PresetName::SingleRay)?,
    };
    let mut ray = single.fins.first().map(|f| f.ray.clone()).ok_or_else(|| usage("config has no fins"))?;

    if runs(StageArg::Ray) {
        let (fitted, report) = calibrate_ray(&ray, budget.unwrap_or(1500))?;
        report_line("ray", &report);
        converged &= report.converged;
        write(&out.join("ray_report.json"), &(report.to_json() + "\n"))?;
        let mut cfg = single.clone();
        for fin in &mut cfg.fins {
            fin.ray = fitted.clone();
        }
        write(&out.join("single-ray.toml"), &to_toml(&cfg))?;
        ray = fitted;
    }
    if runs(StageArg::Membrane) {
        let (rig, report) = calibrate_membrane(&ray, &membrane_rig(), budget.unwrap_or(200))?;
        report_line("membrane", &report);
        converged &= report.converged;
        write(&out.join("membrane_report.json"), &(report.to_json() + "\n"))?;
        write(
            &out.join("membrane-rig.toml"),
            &format!(
                "membrane_factor = {}\nmembrane_damping_factor = {}\n",
                rig.membrane_factor, rig.membrane_damping_factor
            ),
        )?;
    }
    if runs(StageArg::Fin) || runs(StageArg::Swim) {
        let mut robot = match stage {
            StageArg::All => preset(PresetName::Cuttlebot),
            _ => config_or(c, PresetName::Cuttlebot)?,
        };
        if stage == StageArg::All {
            for fin in &mut robot.fins {
                fin.ray.stiffness = ray.stiffness;
                fin.ray.damping_linear = ray.damping_linear;
                fin.ray.damping_quadratic = ray.damping_quadratic;
                fin.ray.vca.bell_width = ray.vca.bell_width;
            }
        }
        if runs(StageArg::Fin) {
            let (fitted, report) = calibrate_fin(&robot, budget.unwrap_or(700), workers)?;
            report_line("fin", &report);
            converged &= report.converged;
            write(&out.join("fin_report.json"), &(report.to_json() + "\n"))?;
            robot = fitted;
        }
        if runs(StageArg::Swim) {
            let (fitted, report) = calibrate_swim(&robot, budget.unwrap_or(150), workers)?;
            report_line("swim", &report);
            converged &= report.converged;
            write(&out.join("swim_report.json"), &(report.to_json() + "\n"))?;
            robot = fitted;
        }
        write(&out.join(format!("{}.toml", robot.name)), &to_toml(&robot))?;
    }
    if !converged {
        eprintln!("warning: at least one stage ended outside its tolerances");
    }
    Ok(())
}

fn compare(reference: &Path, results: &[PathBuf], out: Option<&Path>) -> Outcome {
    let doc = load_reference(&read(reference)?)?;
    let paths: Vec<&Path> = results.iter().map(PathBuf::as_path).collect();
    let summary = collect_summaries(&paths)?;
    let report = compare_report(&summary, &doc);
    let csv = report.to_csv();
    if let Some(path) = out {
        write(path, &csv)?;
    }
    print!("{csv}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: "comparison failed".into(),
        })
    }
}

fn print_preset(name: Option<&str>, format: Format) -> Outcome {
    let Some(name) = name else {
        for n in PRESET_NAMES {
            println!("{n}");
        }
        return Ok(());
    };
    let config = preset(name.parse::<PresetName>()?);
    match format {
        Format::Toml => print!("{}", to_toml(&config)),
        Format::Json => println!("{}", to_json(&config)),
    }
    Ok(())
}
