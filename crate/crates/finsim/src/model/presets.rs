use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde_json::Value;

use super::load::{load_robot_config, parse_document};
use super::{MembraneRig, RobotConfig};
use crate::error::Error;

const SINGLE_RAY: &str = include_str!("../../presets/single-ray.toml");
const CUTTLEBOT: &str = include_str!("../../presets/cuttlebot.toml");
const TUNA: &str = include_str!("../../presets/tuna.toml");
const JELLYFISH: &str = include_str!("../../presets/jellyfish.toml");
const MEMBRANE_RIG: &str = include_str!("../../presets/membrane-rig.toml");

pub const PRESET_NAMES: [&str; 4] = ["single-ray", "cuttlebot", "tuna", "jellyfish"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    SingleRay,
    Cuttlebot,
    Tuna,
    Jellyfish,
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::SingleRay => "single-ray",
            PresetName::Cuttlebot => "cuttlebot",
            PresetName::Tuna => "tuna",
            PresetName::Jellyfish => "jellyfish",
        }
    }

    /// The committed preset document.
    pub fn source(self) -> &'static str {
        match self {
            PresetName::SingleRay => SINGLE_RAY,
            PresetName::Cuttlebot => CUTTLEBOT,
            PresetName::Tuna => TUNA,
            PresetName::Jellyfish => JELLYFISH,
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "single-ray" => Ok(PresetName::SingleRay),
            "cuttlebot" => Ok(PresetName::Cuttlebot),
            "tuna" => Ok(PresetName::Tuna),
            "jellyfish" => Ok(PresetName::Jellyfish),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

static PRESETS: LazyLock<[RobotConfig; 4]> = LazyLock::new(|| {
    [
        PresetName::SingleRay,
        PresetName::Cuttlebot,
        PresetName::Tuna,
        PresetName::Jellyfish,
    ]
    .map(|name| {
        load_robot_config(name.source())
            .unwrap_or_else(|e| panic!("committed preset '{name}' is invalid: {e}"))
    })
});

pub fn preset(name: PresetName) -> RobotConfig {
    PRESETS[name as usize].clone()
}

/// Committed membrane factors of the single-ray membrane test.
pub fn membrane_rig() -> MembraneRig {
    toml::from_str(MEMBRANE_RIG).expect("committed membrane rig parses")
}

/// The single-ray preset as a raw document; source of every default.
pub(crate) fn single_ray_document() -> Value {
    static DOC: LazyLock<Value> =
        LazyLock::new(|| parse_document(SINGLE_RAY).expect("single-ray preset parses"));
    DOC.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuttlebot_layout() {
        let cfg = preset(PresetName::Cuttlebot);
        assert_eq!(cfg.fins.len(), 2);
        assert_eq!(cfg.ray_count(), 8);
        for fin in &cfg.fins {
            assert_eq!(fin.fin_length, 0.105);
            assert_eq!(fin.ray_positions, vec![0.0, 0.035, 0.07, 0.105]);
            assert!((fin.ray_spacing() - 0.035).abs() < 1e-15);
        }
        assert_eq!(cfg.body_length, 0.135);
        assert_eq!(cfg.body_mass, 0.020);
    }

    #[test]
    fn single_ray_vca() {
        let cfg = preset(PresetName::SingleRay);
        let vca = &cfg.fins[0].ray.vca;
        assert_eq!(vca.stroke_limit, 0.002);
        assert!((vca.force_constant * 0.480 - 0.490).abs() < 1e-12);
        assert_eq!(cfg.fins[0].ray.transmission_ratio, 11.75);
        assert_eq!(cfg.fins.len(), 1);
        assert_eq!(cfg.fins[0].ray_positions.len(), 1);
    }

    #[test]
    fn tuna_and_jellyfish_morphology() {
        let tuna = preset(PresetName::Tuna);
        assert_eq!(tuna.fins.len(), 1);
        assert_eq!(tuna.fins[0].ray_positions.len(), 2);
        let jelly = preset(PresetName::Jellyfish);
        assert_eq!(jelly.fins.len(), 4);
        assert!(jelly.fins.iter().all(|f| f.ray_positions.len() == 1));
    }

    #[test]
    fn membrane_rig_is_stiffer_and_damped() {
        let rig = membrane_rig();
        assert!(rig.membrane_factor >= 1.0 && rig.membrane_damping_factor > 0.0);
        let ray = rig.apply(&preset(PresetName::SingleRay).fins[0].ray);
        assert_eq!(ray.membrane_factor, rig.membrane_factor);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!("shark".parse::<PresetName>(), Err(Error::UnknownPreset(_))));
    }
}
