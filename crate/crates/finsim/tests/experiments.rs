use finsim::harness::{
    collect_summaries, compare_report, load_experiment_spec, load_reference, run_experiment, run_experiment_with,
    ExperimentKind, ExperimentSpec,
};
use finsim::model::{load_robot_config, preset, to_json, to_toml, PresetName, PRESET_NAMES};
use finsim::units::{parse_quantity, Dimension};
use proptest::prelude::*;

fn small_heatmap() -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(ExperimentKind::Heatmap);
    spec.wavelengths = Some(vec![0.105, 0.2625]);
    spec.frequencies = Some(vec![1.0, 2.0]);
    spec
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = preset(PresetName::Cuttlebot);
    let a = run_experiment_with(&small_heatmap(), &cfg).unwrap();
    let b = run_experiment_with(&small_heatmap(), &cfg).unwrap();
    assert_eq!(a.files, b.files);
    assert!(a.files.contains_key("heatmap.csv"));
    assert!(a.files["heatmap.svg"].starts_with("<svg"));
}

#[test]
fn written_summary_feeds_comparison() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small_heatmap(), Some(dir.path())).unwrap();
    let summary = collect_summaries(&[dir.path()]).unwrap();
    let peak = summary["peak_amplitude"];
    assert!(peak > 0.0 && peak < 0.1, "{peak}");
    let doc = load_reference(&format!(
        "[[quantity]]\nquantity = \"peak_amplitude\"\nvalue = {peak}\nrelative_tolerance = 1e-9\n\
         [[quantity]]\nquantity = \"never_produced\"\nvalue = 1.0\nrelative_tolerance = 0.1\n"
    ))
    .unwrap();
    let report = compare_report(&summary, &doc);
    assert!(!report.passed());
    assert!(report.to_csv().contains("not produced"));
}

#[test]
fn every_preset_round_trips_through_both_formats() {
    for name in PRESET_NAMES {
        let cfg = preset(name.parse::<PresetName>().unwrap());
        assert_eq!(load_robot_config(&to_toml(&cfg)).unwrap(), cfg, "{name} toml");
        assert_eq!(load_robot_config(&to_json(&cfg)).unwrap(), cfg, "{name} json");
    }
}

#[test]
fn experiment_spec_accepts_units() {
    let spec = load_experiment_spec("kind = \"swim-map\"\nwavelengths = [\"262.5 mm\"]\nfrequencies = [\"2 Hz\"]\n").unwrap();
    assert_eq!(spec.wavelengths, Some(vec![0.2625]));
    assert_eq!(spec.frequencies, Some(vec![2.0]));
}

proptest! {
    #[test]
    fn config_parser_never_panics(text in "\\PC{0,200}") {
        let _ = load_robot_config(&text);
        let _ = load_experiment_spec(&text);
        let _ = load_reference(&text);
    }

    #[test]
    fn millimetres_scale_to_metres(v in 0.001f64..1e4) {
        let m = parse_quantity(&format!("{v} mm"), Dimension::Length).unwrap();
        prop_assert!((m - v * 1e-3).abs() <= 1e-12 * v.max(1.0));
    }
}
