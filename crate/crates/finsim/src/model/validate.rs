use super::{CalibrationTargets, FinAssemblyConfig, HydroModel, RayModel, RobotConfig};

/// Every violated invariant of `config`, one message per rule. Empty means valid.
pub fn validate(config: &RobotConfig) -> Vec<String> {
    let mut v = Violations::default();

    v.positive("body_length", config.body_length);
    v.positive("body_width", config.body_width);
    v.positive("body_mass", config.body_mass);
    v.positive("drive_limits.max_current", config.drive_limits.max_current);
    v.non_negative("drive_limits.supply_resistance", config.drive_limits.supply_resistance);
    v.at_least("drive_limits.power_overhead", config.drive_limits.power_overhead, 1.0);

    if config.fins.is_empty() {
        v.push("no fins defined".to_string());
    }
    for (i, fin) in config.fins.iter().enumerate() {
        validate_fin(&mut v, &format!("fins[{i}]."), fin);
    }
    validate_hydro(&mut v, &config.hydro);
    v.0
}

fn validate_fin(v: &mut Violations, prefix: &str, fin: &FinAssemblyConfig) {
    if fin.ray_positions.is_empty() {
        v.push(format!("{prefix}ray_positions must contain at least one ray"));
    }
    if fin.ray_positions.iter().any(|x| !x.is_finite()) {
        v.push(format!("{prefix}ray_positions must be finite"));
    }
    if fin.ray_positions.windows(2).any(|w| !(w[1] > w[0])) {
        v.push(format!("{prefix}ray_positions: positions not increasing"));
    }
    v.positive(&format!("{prefix}fin_length"), fin.fin_length);
    if fin
        .ray_positions
        .iter()
        .any(|&x| x < 0.0 || x > fin.fin_length)
    {
        v.push(format!("{prefix}ray_positions must lie within [0, fin_length]"));
    }
    v.non_negative(&format!("{prefix}coupling_stiffness"), fin.coupling_stiffness);
    v.non_negative(&format!("{prefix}coupling_damping"), fin.coupling_damping);
    v.positive(&format!("{prefix}span"), fin.span);
    v.finite(&format!("{prefix}base_offset"), fin.base_offset);
    v.non_negative(&format!("{prefix}root_offset"), fin.root_offset);
    v.finite(&format!("{prefix}azimuth"), fin.azimuth);
    validate_ray(v, &format!("{prefix}ray."), &fin.ray);
}

fn validate_ray(v: &mut Violations, prefix: &str, ray: &RayModel) {
    let vca = &ray.vca;
    v.positive(&format!("{prefix}vca.force_constant"), vca.force_constant);
    v.positive(&format!("{prefix}vca.stroke_limit"), vca.stroke_limit);
    v.positive(&format!("{prefix}vca.bell_width"), vca.bell_width);
    v.positive(&format!("{prefix}vca.coil_resistance"), vca.coil_resistance);
    v.non_negative(&format!("{prefix}vca.coil_inductance"), vca.coil_inductance);
    v.positive(&format!("{prefix}transmission_ratio"), ray.transmission_ratio);
    v.positive(&format!("{prefix}effective_mass"), ray.effective_mass);
    v.non_negative(&format!("{prefix}stiffness"), ray.stiffness);
    v.non_negative(&format!("{prefix}damping_linear"), ray.damping_linear);
    v.non_negative(&format!("{prefix}damping_quadratic"), ray.damping_quadratic);
    v.non_negative(&format!("{prefix}load_mass"), ray.load_mass);
    v.at_least(&format!("{prefix}membrane_factor"), ray.membrane_factor, 1.0);
    v.at_least(
        &format!("{prefix}membrane_damping_factor"),
        ray.membrane_damping_factor,
        1.0,
    );
}

fn validate_hydro(v: &mut Violations, h: &HydroModel) {
    v.positive("hydro.water_density", h.water_density);
    v.non_negative("hydro.normal_drag_coeff", h.normal_drag_coeff);
    v.non_negative("hydro.edge_reactive_coeff", h.edge_reactive_coeff);
    for (dof, value) in ["surge", "sway", "heave"].iter().zip(h.body_drag_coeff.as_array()) {
        v.non_negative(&format!("hydro.body_drag_coeff.{dof}"), value);
    }
    for (dof, value) in ["surge", "sway", "heave"].iter().zip(h.body_reference_area.as_array()) {
        v.non_negative(&format!("hydro.body_reference_area.{dof}"), value);
    }
    for (dof, value) in ["surge", "sway", "heave"].iter().zip(h.added_mass_coeff.as_array()) {
        v.non_negative(&format!("hydro.added_mass_coeff.{dof}"), value);
    }
    v.non_negative("hydro.yaw_drag_coeff", h.yaw_drag_coeff);
    v.positive("hydro.yaw_inertia", h.yaw_inertia);
    v.non_negative("hydro.thrust_gain", h.thrust_gain);
}

pub fn validate_targets(targets: &CalibrationTargets) -> Vec<String> {
    let mut v = Violations::default();
    for t in &targets.targets {
        v.positive(&format!("{}.weight", t.quantity), t.weight);
        if !(t.tolerance > 0.0 && t.tolerance < 1.0) {
            v.push(format!("{}.tolerance must be in (0, 1)", t.quantity));
        }
        v.finite(&format!("{}.target_value", t.quantity), t.target_value);
    }
    v.0
}

#[derive(Default)]
struct Violations(Vec<String>);

impl Violations {
    fn push(&mut self, msg: String) {
        self.0.push(msg);
    }

    fn positive(&mut self, field: &str, value: f64) {
        if !(value > 0.0 && value.is_finite()) {
            self.push(format!("{field} must be > 0"));
        }
    }

    fn non_negative(&mut self, field: &str, value: f64) {
        if !(value >= 0.0 && value.is_finite()) {
            self.push(format!("{field} must be ≥ 0"));
        }
    }

    fn at_least(&mut self, field: &str, value: f64, bound: f64) {
        if !(value >= bound && value.is_finite()) {
            self.push(format!("{field} must be ≥ {bound}"));
        }
    }

    fn finite(&mut self, field: &str, value: f64) {
        if !value.is_finite() {
            self.push(format!("{field} must be finite"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, PresetName, PRESET_NAMES};

    #[test]
    fn presets_are_valid() {
        for name in PRESET_NAMES {
            let cfg = preset(name.parse::<PresetName>().unwrap());
            assert_eq!(validate(&cfg), Vec::<String>::new(), "{name}");
        }
    }

    #[test]
    fn zero_body_mass() {
        let mut cfg = preset(PresetName::Cuttlebot);
        cfg.body_mass = 0.0;
        assert_eq!(validate(&cfg), vec!["body_mass must be > 0".to_string()]);
    }

    #[test]
    fn negative_coupling() {
        let mut cfg = preset(PresetName::Cuttlebot);
        cfg.fins[1].coupling_stiffness = -1.0;
        let v = validate(&cfg);
        assert_eq!(v.len(), 1);
        assert!(v[0].ends_with("coupling_stiffness must be ≥ 0"), "{v:?}");
    }

    #[test]
    fn all_violations_are_listed() {
        let mut cfg = preset(PresetName::SingleRay);
        cfg.body_width = -1.0;
        cfg.fins[0].ray.membrane_factor = 0.5;
        cfg.hydro.yaw_inertia = 0.0;
        assert_eq!(validate(&cfg).len(), 3);
    }

    #[test]
    fn target_tolerance_range() {
        let t = CalibrationTargets::new(vec![crate::model::CalibrationTarget {
            quantity: "rise_time".into(),
            target_value: 0.1,
            weight: 1.0,
            tolerance: 1.5,
        }]);
        assert_eq!(validate_targets(&t).len(), 1);
    }
}
