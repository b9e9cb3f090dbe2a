//! Robot description: shared domain types, presets, loading and validation.
//!
//! All stored quantities are base SI. Stroke coordinates refer to the voice
//! coil travel; tip coordinates refer to the distal end of the fin ray.

mod load;
mod presets;
mod validate;

use serde::{Deserialize, Serialize};

use crate::units::de_si;

pub use load::{load_robot_config, load_robot_config_file, to_json, to_toml};
pub(crate) use load::{from_value, parse_document};
pub use presets::{membrane_rig, preset, PresetName, PRESET_NAMES};
pub use validate::{validate, validate_targets};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub name: String,
    #[serde(deserialize_with = "de_si::length")]
    pub body_length: f64,
    #[serde(deserialize_with = "de_si::length")]
    pub body_width: f64,
    #[serde(deserialize_with = "de_si::mass")]
    pub body_mass: f64,
    pub drive_limits: DriveLimits,
    pub hydro: HydroModel,
    pub fins: Vec<FinAssemblyConfig>,
}

impl RobotConfig {
    pub fn ray_count(&self) -> usize {
        self.fins.iter().map(|f| f.ray_positions.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveLimits {
    #[serde(deserialize_with = "de_si::current")]
    pub max_current: f64,
    /// Series resistance of the driver stage, added to each coil.
    #[serde(deserialize_with = "de_si::resistance")]
    pub supply_resistance: f64,
    /// Driver and supply losses on top of the coil I²R, ≥ 1.
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub power_overhead: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinSide {
    /// Lateral fin on the +y side; rays deflect in heave.
    Left,
    /// Lateral fin on the −y side; rays deflect in heave.
    Right,
    /// Fin radiating from the body at `azimuth`; rays deflect in heave.
    Radial,
    /// Tail fin behind the body; rays deflect in sway.
    Caudal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinAssemblyConfig {
    pub side: FinSide,
    /// Ray base positions along the fin, measured from its posterior end
    /// toward the head.
    #[serde(deserialize_with = "de_si::length_list")]
    pub ray_positions: Vec<f64>,
    #[serde(deserialize_with = "de_si::length")]
    pub fin_length: f64,
    /// Membrane spring between adjacent ray tips, in tip coordinates.
    #[serde(deserialize_with = "de_si::stiffness")]
    pub coupling_stiffness: f64,
    /// Membrane dashpot between adjacent ray tips, in tip coordinates.
    #[serde(deserialize_with = "de_si::linear_damping")]
    pub coupling_damping: f64,
    /// Ray length from root to tip.
    #[serde(deserialize_with = "de_si::length")]
    pub span: f64,
    /// Body-frame surge coordinate of the fin's posterior end.
    #[serde(deserialize_with = "de_si::length")]
    pub base_offset: f64,
    /// Distance of the fin root line from the body centreline.
    #[serde(deserialize_with = "de_si::length")]
    pub root_offset: f64,
    /// Heading of a radial fin, measured from the surge axis toward +y.
    #[serde(deserialize_with = "de_si::angle")]
    pub azimuth: f64,
    pub ray: RayModel,
}

impl FinAssemblyConfig {
    /// Smallest gap between neighbouring rays, or the fin length for a single ray.
    pub fn ray_spacing(&self) -> f64 {
        if self.ray_positions.len() < 2 {
            return self.fin_length;
        }
        self.ray_positions
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcaParams {
    /// Peak force per ampere at stroke centre.
    #[serde(deserialize_with = "de_si::force_per_current")]
    pub force_constant: f64,
    /// Half travel of the coil.
    #[serde(deserialize_with = "de_si::length")]
    pub stroke_limit: f64,
    /// Width of the bell-shaped force profile along the stroke.
    #[serde(deserialize_with = "de_si::length")]
    pub bell_width: f64,
    #[serde(deserialize_with = "de_si::resistance")]
    pub coil_resistance: f64,
    #[serde(deserialize_with = "de_si::inductance")]
    pub coil_inductance: f64,
}

/// Lumped single-mode model of one fin ray, in the stroke coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayModel {
    pub vca: VcaParams,
    /// Tip deflection per unit coil stroke.
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub transmission_ratio: f64,
    /// Coil plus ray inertia, including added water mass.
    #[serde(deserialize_with = "de_si::mass")]
    pub effective_mass: f64,
    #[serde(deserialize_with = "de_si::stiffness")]
    pub stiffness: f64,
    #[serde(deserialize_with = "de_si::linear_damping")]
    pub damping_linear: f64,
    #[serde(deserialize_with = "de_si::quadratic_damping")]
    pub damping_quadratic: f64,
    /// Mass attached at the tip.
    #[serde(deserialize_with = "de_si::mass")]
    pub load_mass: f64,
    /// Stiffness and linear-damping multiplier when embedded in a membrane.
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub membrane_factor: f64,
    /// Extra multiplier on both damping terms when embedded in a membrane.
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub membrane_damping_factor: f64,
}

impl RayModel {
    /// Inertia seen by the coil: own mass plus the tip load through the lever.
    pub fn stroke_inertia(&self) -> f64 {
        self.effective_mass + self.load_mass * self.transmission_ratio * self.transmission_ratio
    }

    /// Constant stroke-coordinate force of the tip load's weight (pull direction).
    pub fn gravity_bias(&self) -> f64 {
        self.load_mass * GRAVITY * self.transmission_ratio
    }

    pub fn effective_stiffness(&self) -> f64 {
        self.stiffness * self.membrane_factor
    }

    pub fn effective_damping_linear(&self) -> f64 {
        self.damping_linear * self.membrane_factor * self.membrane_damping_factor
    }

    pub fn effective_damping_quadratic(&self) -> f64 {
        self.damping_quadratic * self.membrane_damping_factor
    }

    /// Same ray with the tip load replaced.
    pub fn with_load(&self, load_mass: f64) -> Self {
        Self {
            load_mass,
            ..self.clone()
        }
    }
}

/// Membrane factors of a ray embedded in a silicone sheet on the test rig.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneRig {
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub membrane_factor: f64,
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub membrane_damping_factor: f64,
}

impl MembraneRig {
    /// `ray` embedded in the rig's membrane.
    pub fn apply(&self, ray: &RayModel) -> RayModel {
        RayModel {
            membrane_factor: self.membrane_factor,
            membrane_damping_factor: self.membrane_damping_factor,
            ..ray.clone()
        }
    }
}

/// Per translational degree of freedom: surge, sway, heave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dof3 {
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub surge: f64,
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub sway: f64,
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub heave: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaDof3 {
    #[serde(deserialize_with = "de_si::area")]
    pub surge: f64,
    #[serde(deserialize_with = "de_si::area")]
    pub sway: f64,
    #[serde(deserialize_with = "de_si::area")]
    pub heave: f64,
}

impl Dof3 {
    pub fn as_array(&self) -> [f64; 3] {
        [self.surge, self.sway, self.heave]
    }
}

impl AreaDof3 {
    pub fn as_array(&self) -> [f64; 3] {
        [self.surge, self.sway, self.heave]
    }
}

/// Reduced-order hydrodynamic closure for fins and body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroModel {
    #[serde(deserialize_with = "de_si::density")]
    pub water_density: f64,
    /// Normal-force coefficient of a fin surface element.
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub normal_drag_coeff: f64,
    /// Reactive (added-mass) coefficient of a ray's free edge.
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub edge_reactive_coeff: f64,
    pub body_drag_coeff: Dof3,
    pub body_reference_area: AreaDof3,
    pub added_mass_coeff: Dof3,
    #[serde(deserialize_with = "de_si::yaw_drag")]
    pub yaw_drag_coeff: f64,
    #[serde(deserialize_with = "de_si::inertia")]
    pub yaw_inertia: f64,
    /// Global calibration factor on fin forces.
    #[serde(deserialize_with = "de_si::dimensionless")]
    pub thrust_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTarget {
    pub quantity: String,
    pub target_value: f64,
    pub weight: f64,
    /// Relative tolerance, in (0, 1).
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargets {
    pub targets: Vec<CalibrationTarget>,
}

impl CalibrationTargets {
    pub fn new(targets: Vec<CalibrationTarget>) -> Self {
        Self { targets }
    }
}
