//! Fin gaits of the swimming modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fin::cell_dt;
use crate::gait::{Direction, EnvelopeSpec, SquareMode, WavePlan, Waveform};
use crate::hydro::{simulate_swim, FinDrive, SwimResult};
use crate::model::{FinSide, RobotConfig};

use super::grids::swim_duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwimMode {
    /// Backward travelling waves on every fin.
    Surge,
    /// Backward wave on the left fin, forward wave on the right.
    Yaw,
    /// Left fin flapping with all rays in phase; the others idle.
    Sway,
    /// All rays pulled down for half of each period, released for the other half.
    Ascend,
    /// All rays pushed up for half of each period, released for the other half.
    Descend,
}

impl SwimMode {
    pub fn label(self) -> &'static str {
        match self {
            SwimMode::Surge => "surge",
            SwimMode::Yaw => "yaw",
            SwimMode::Sway => "sway",
            SwimMode::Ascend => "ascend",
            SwimMode::Descend => "descend",
        }
    }

    /// Whether the gait uses the wavelength; flapping modes drive every ray in phase.
    pub fn uses_wavelength(self) -> bool {
        matches!(self, SwimMode::Surge | SwimMode::Yaw)
    }
}

/// Per-fin drives of `mode` at wavelength `wavelength` and frequency `frequency`.
pub fn mode_drives(
    config: &RobotConfig,
    mode: SwimMode,
    current: f64,
    wavelength: f64,
    frequency: f64,
) -> Result<Vec<FinDrive>> {
    let base = WavePlan::sine(current, wavelength, frequency, Direction::Backward);
    let flap = WavePlan {
        wavelength: f64::INFINITY,
        ..base.clone()
    };
    let square = |mode| WavePlan {
        waveform: Waveform::Square { duty: 0.5, mode },
        ..flap.clone()
    };
    if mode == SwimMode::Yaw && !config.fins.iter().any(|f| f.side == FinSide::Right) {
        return Err(Error::Domain("yaw mode needs a right fin".into()));
    }
    Ok(config
        .fins
        .iter()
        .enumerate()
        .map(|(i, fin)| {
            let rays = fin.ray_positions.len();
            let plan = match mode {
                SwimMode::Surge => base.clone(),
                SwimMode::Yaw if fin.side == FinSide::Right => base.with_direction(Direction::Forward),
                SwimMode::Yaw => base.clone(),
                SwimMode::Sway if i == 0 => flap.clone(),
                SwimMode::Sway => WavePlan {
                    current_amplitude: 0.0,
                    ..flap.clone()
                },
                SwimMode::Ascend => square(SquareMode::PullOnly),
                SwimMode::Descend => square(SquareMode::PushOnly),
            };
            FinDrive {
                plan,
                envelope: EnvelopeSpec::uniform(rays),
            }
        })
        .collect())
}

/// Swim `mode` from rest for [`swim_duration`] at the cell time step.
pub fn swim_mode(
    config: &RobotConfig,
    mode: SwimMode,
    current: f64,
    wavelength: f64,
    frequency: f64,
    max_dt: f64,
) -> Result<SwimResult> {
    let drives = mode_drives(config, mode, current, wavelength, frequency)?;
    simulate_swim(config, &drives, swim_duration(frequency), cell_dt(frequency, max_dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, PresetName};

    #[test]
    fn yaw_opposes_the_waves() {
        let cfg = preset(PresetName::Cuttlebot);
        let d = mode_drives(&cfg, SwimMode::Yaw, 0.212, 0.2625, 1.5).unwrap();
        assert_eq!(d[0].plan.direction, Direction::Backward);
        assert_eq!(d[1].plan.direction, Direction::Forward);
    }

    #[test]
    fn sway_flaps_one_fin() {
        let cfg = preset(PresetName::Cuttlebot);
        let d = mode_drives(&cfg, SwimMode::Sway, 0.212, 0.2625, 1.5).unwrap();
        assert_eq!(d[0].plan.wavenumber(), 0.0);
        assert_eq!(d[1].plan.current_amplitude, 0.0);
    }

    #[test]
    fn yaw_needs_two_sides() {
        let cfg = preset(PresetName::Tuna);
        assert!(mode_drives(&cfg, SwimMode::Yaw, 0.2, 0.2, 1.0).is_err());
    }
}
