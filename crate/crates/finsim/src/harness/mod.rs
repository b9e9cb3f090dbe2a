//! Calibration stages, experiment runner and reference comparison.

pub mod calibrate;
pub mod compare;
pub mod experiment;
pub mod grids;
pub mod modes;
pub mod stages;
pub mod svg;

pub use calibrate::{calibrate, target, CalibrationReport, FittedParameter, Quantities, Residual};
pub use compare::{collect_summaries, compare_report, load_reference, ComparisonReport, ReferenceDocument};
pub use experiment::{
    load_experiment_spec, resolve_config, run_experiment, run_experiment_with, ExperimentKind, ExperimentOutput,
    ExperimentSpec,
};
pub use modes::{mode_drives, swim_mode, SwimMode};
