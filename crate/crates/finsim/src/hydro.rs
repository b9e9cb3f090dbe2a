//! Fin forces from quasi-steady resistive-force theory, four-DOF rigid-body
//! swimming, and the dimensionless swimming metrics.
//!
//! Body frame: `x` forward (surge), `y` to the left (sway), `z` up (heave),
//! yaw positive counter-clockwise seen from above. The origin is the body's
//! centre of mass. The water is at rest.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fin::{simulate_fin, FinField};
use crate::gait::{EnvelopeSpec, Waveform, SquareMode, WavePlan};
use crate::model::{FinAssemblyConfig, FinSide, HydroModel, RobotConfig};
use crate::table::{num, Table};

/// Default factor turning the mean of `|u|` into an amplitude: `π/2` is exact
/// for a sinusoid.
pub const RECTIFIED_SINE_CORRECTION: f64 = std::f64::consts::FRAC_PI_2;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
const GAUSS: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

type Vec3 = [f64; 3];

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Force and yaw torque about the centre of mass, body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Wrench {
    pub force: Vec3,
    pub yaw_torque: f64,
}

impl Wrench {
    fn add_force_at(&mut self, point: Vec3, force: Vec3) {
        self.force = add(self.force, force);
        self.yaw_torque += point[0] * force[1] - point[1] * force[0];
    }

    pub fn scaled(self, s: f64) -> Self {
        Self {
            force: scale(self.force, s),
            yaw_torque: self.yaw_torque * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().all(|f| f.is_finite()) && self.yaw_torque.is_finite()
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;

    fn add(self, rhs: Wrench) -> Wrench {
        Wrench {
            force: add(self.force, rhs.force),
            yaw_torque: self.yaw_torque + rhs.yaw_torque,
        }
    }
}

/// Rigid-body velocity, body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BodyVelocity {
    pub linear: Vec3,
    pub yaw_rate: f64,
}

impl BodyVelocity {
    /// Velocity of a body-fixed point.
    pub fn at(&self, p: Vec3) -> Vec3 {
        [
            self.linear[0] - self.yaw_rate * p[1],
            self.linear[1] + self.yaw_rate * p[0],
            self.linear[2],
        ]
    }
}

/// Placement of a fin in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinFrame {
    /// Root point of the ray at position 0.
    pub origin: Vec3,
    /// Direction of increasing ray position.
    pub chord: Vec3,
    /// Root-to-tip direction of the rays.
    pub span_dir: Vec3,
    /// Direction of positive tip deflection.
    pub deflection_axis: Vec3,
}

impl FinFrame {
    pub fn of(fin: &FinAssemblyConfig) -> Self {
        match fin.side {
            FinSide::Left => Self {
                origin: [fin.base_offset, fin.root_offset, 0.0],
                chord: [1.0, 0.0, 0.0],
                span_dir: [0.0, 1.0, 0.0],
                deflection_axis: [0.0, 0.0, 1.0],
            },
            FinSide::Right => Self {
                origin: [fin.base_offset, -fin.root_offset, 0.0],
                chord: [1.0, 0.0, 0.0],
                span_dir: [0.0, -1.0, 0.0],
                deflection_axis: [0.0, 0.0, 1.0],
            },
            FinSide::Radial => {
                let (s, c) = fin.azimuth.sin_cos();
                let span_dir = [c, s, 0.0];
                let chord = [-s, c, 0.0];
                Self {
                    origin: add(scale(span_dir, fin.root_offset), scale(chord, fin.base_offset)),
                    chord,
                    span_dir,
                    deflection_axis: [0.0, 0.0, 1.0],
                }
            }
            FinSide::Caudal => Self {
                origin: [fin.base_offset - fin.root_offset, 0.0, 0.0],
                chord: [0.0, 0.0, 1.0],
                span_dir: [-1.0, 0.0, 0.0],
                deflection_axis: [0.0, 1.0, 0.0],
            },
        }
    }

    fn root(&self, x: f64) -> Vec3 {
        add(self.origin, scale(self.chord, x))
    }
}

/// A strip of fin membrane between two rays, root to tip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Element {
    pub frame: FinFrame,
    /// Chord position of the strip centre.
    pub position: f64,
    pub width: f64,
    pub span: f64,
}

/// Motion of a strip at its tip edge; deflection grows linearly from the root.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ElementMotion {
    pub tip_deflection: f64,
    pub tip_velocity: f64,
    /// Chordwise slope `∂u/∂x` at the tip.
    pub tip_slope: f64,
}

/// Resistive normal force `−½ρC_nA|v_n|v_n` on one strip, integrated along
/// the span, scaled by the thrust gain.
pub fn element_wrench(motion: &ElementMotion, body: &BodyVelocity, element: &Element, hydro: &HydroModel) -> Wrench {
    let f = &element.frame;
    let mut w = Wrench::default();
    for (eta, weight) in GAUSS {
        let slope = eta * motion.tip_slope;
        let norm = (1.0 + slope * slope).sqrt();
        let normal = scale(add(f.deflection_axis, scale(f.chord, -slope)), 1.0 / norm);
        let point = add(
            add(f.root(element.position), scale(f.span_dir, eta * element.span)),
            scale(f.deflection_axis, eta * motion.tip_deflection),
        );
        let velocity = add(body.at(point), scale(f.deflection_axis, eta * motion.tip_velocity));
        let vn = dot(velocity, normal);
        let area = element.width * element.span * weight;
        let magnitude = -0.5 * hydro.water_density * hydro.normal_drag_coeff * area * vn.abs() * vn;
        w.add_force_at(point, scale(normal, magnitude));
    }
    w.scaled(hydro.thrust_gain)
}

/// Reactive force of the water shed from a ray's free tip, directed from tip
/// to root: `½ρC_e·(π/4)b²·(w² − (U·2u/L)²)`, with `w` the tip's lateral
/// velocity and `U` the body velocity along the ray.
pub fn edge_wrench(
    frame: &FinFrame,
    position: f64,
    chord_share: f64,
    span: f64,
    tip_deflection: f64,
    tip_velocity: f64,
    body: &BodyVelocity,
    hydro: &HydroModel,
) -> Wrench {
    let tip = add(
        add(frame.root(position), scale(frame.span_dir, span)),
        scale(frame.deflection_axis, tip_deflection),
    );
    let v = body.at(tip);
    let w = tip_velocity + dot(v, frame.deflection_axis);
    let along = dot(v, frame.span_dir) * 2.0 * tip_deflection / span;
    let area = std::f64::consts::FRAC_PI_4 * chord_share * chord_share;
    let magnitude = 0.5 * hydro.water_density * hydro.edge_reactive_coeff * area * (w * w - along * along);
    let mut out = Wrench::default();
    out.add_force_at(tip, scale(frame.span_dir, -magnitude));
    out.scaled(hydro.thrust_gain)
}

/// Instantaneous tip state of one fin's rays.
#[derive(Debug, Clone, Copy)]
pub struct FinKinematics<'a> {
    pub tips: &'a [f64],
    pub tip_velocities: &'a [f64],
}

/// Chord length attributed to each ray: half of each neighbouring gap, or the
/// whole fin for a single ray.
fn chord_shares(fin: &FinAssemblyConfig) -> Vec<f64> {
    let x = &fin.ray_positions;
    if x.len() == 1 {
        return vec![fin.fin_length];
    }
    (0..x.len())
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < x.len() { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Fin forces alone (no body drag).
pub fn fin_wrench(fin: &FinAssemblyConfig, kin: FinKinematics, body: &BodyVelocity, hydro: &HydroModel) -> Wrench {
    let frame = FinFrame::of(fin);
    let x = &fin.ray_positions;
    let mut total = Wrench::default();
    if x.len() == 1 {
        let element = Element {
            frame,
            position: x[0],
            width: fin.fin_length,
            span: fin.span,
        };
        let motion = ElementMotion {
            tip_deflection: kin.tips[0],
            tip_velocity: kin.tip_velocities[0],
            tip_slope: 0.0,
        };
        total = total + element_wrench(&motion, body, &element, hydro);
    }
    for i in 0..x.len().saturating_sub(1) {
        let width = x[i + 1] - x[i];
        let element = Element {
            frame,
            position: 0.5 * (x[i] + x[i + 1]),
            width,
            span: fin.span,
        };
        let motion = ElementMotion {
            tip_deflection: 0.5 * (kin.tips[i] + kin.tips[i + 1]),
            tip_velocity: 0.5 * (kin.tip_velocities[i] + kin.tip_velocities[i + 1]),
            tip_slope: (kin.tips[i + 1] - kin.tips[i]) / width,
        };
        total = total + element_wrench(&motion, body, &element, hydro);
    }
    for (i, share) in chord_shares(fin).into_iter().enumerate() {
        total = total
            + edge_wrench(
                &frame,
                x[i],
                share,
                fin.span,
                kin.tips[i],
                kin.tip_velocities[i],
                body,
                hydro,
            );
    }
    total
}

/// Quadratic drag of the hull on translation and yaw.
pub fn body_drag(body: &BodyVelocity, hydro: &HydroModel) -> Wrench {
    let cd = hydro.body_drag_coeff.as_array();
    let area = hydro.body_reference_area.as_array();
    let mut force = [0.0; 3];
    for k in 0..3 {
        let v = body.linear[k];
        force[k] = -0.5 * hydro.water_density * cd[k] * area[k] * v.abs() * v;
    }
    Wrench {
        force,
        yaw_torque: -hydro.yaw_drag_coeff * body.yaw_rate.abs() * body.yaw_rate,
    }
}

/// Sum of all fin forces minus hull drag.
pub fn net_wrench(fins: &[FinKinematics], body: &BodyVelocity, config: &RobotConfig) -> Wrench {
    let mut total = body_drag(body, &config.hydro);
    for (fin, kin) in config.fins.iter().zip(fins) {
        total = total + fin_wrench(fin, *kin, body, &config.hydro);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RobotState {
    /// World-frame position: surge, sway, heave axes at t = 0.
    pub position: Vec3,
    pub yaw: f64,
    /// Body-frame velocity.
    pub velocity: Vec3,
    pub yaw_rate: f64,
    pub time: f64,
}

impl RobotState {
    pub fn body_velocity(&self) -> BodyVelocity {
        BodyVelocity {
            linear: self.velocity,
            yaw_rate: self.yaw_rate,
        }
    }
}

/// Gait of one fin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinDrive {
    pub plan: WavePlan,
    pub envelope: EnvelopeSpec,
}

impl FinDrive {
    pub fn uniform(plan: WavePlan, rays: usize) -> Self {
        Self {
            plan,
            envelope: EnvelopeSpec::uniform(rays),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwimResult {
    pub trajectory: Vec<RobotState>,
    /// Mean body-frame velocity over the steady window (last half).
    pub mean_velocity: Vec3,
    /// Largest body-frame speed per axis over the steady window.
    pub peak_velocity: Vec3,
    pub mean_yaw_rate: f64,
    pub peak_yaw_rate: f64,
    #[serde(skip)]
    pub fin_fields: Vec<FinField>,
}

impl SwimResult {
    pub fn to_csv(&self) -> String {
        let mut t = Table::new(&[
            "t_s", "surge_m", "sway_m", "heave_m", "yaw_rad", "surge_vel_mps", "sway_vel_mps",
            "heave_vel_mps", "yaw_rate_radps",
        ]);
        for s in &self.trajectory {
            t.row(&[
                num(s.time),
                num(s.position[0]),
                num(s.position[1]),
                num(s.position[2]),
                num(s.yaw),
                num(s.velocity[0]),
                num(s.velocity[1]),
                num(s.velocity[2]),
                num(s.yaw_rate),
            ]);
        }
        t.render()
    }
}

/// Derivative of (position, yaw, velocity, yaw rate).
fn body_rates(state: &[f64; 8], wrench: &Wrench, mass: &Vec3, yaw_inertia: f64) -> [f64; 8] {
    let (yaw, u, v, w, r) = (state[3], state[4], state[5], state[6], state[7]);
    let (s, c) = yaw.sin_cos();
    [
        u * c - v * s,
        u * s + v * c,
        w,
        r,
        wrench.force[0] / mass[0],
        wrench.force[1] / mass[1],
        wrench.force[2] / mass[2],
        wrench.yaw_torque / yaw_inertia,
    ]
}

/// Simulate the fins under their gaits, then carry the body with the
/// resulting forces. Fin motion is prescribed by the actuators and does not
/// feel the body's motion.
pub fn simulate_swim(config: &RobotConfig, drives: &[FinDrive], duration: f64, dt: f64) -> Result<SwimResult> {
    if drives.len() != config.fins.len() {
        return Err(Error::Validation(vec![format!(
            "{} fin drives for {} fins",
            drives.len(),
            config.fins.len()
        )]));
    }
    let slowest = drives
        .iter()
        .map(|d| d.plan.frequency)
        .fold(f64::INFINITY, f64::min);
    if duration < 20.0 / slowest * (1.0 - 1e-9) {
        return Err(Error::Domain(format!(
            "duration {duration} s shorter than twenty drive periods"
        )));
    }
    for d in drives {
        d.plan.validate(config.drive_limits.max_current)?;
    }
    let fields = config
        .fins
        .iter()
        .zip(drives)
        .map(|(fin, d)| simulate_fin(fin, &d.plan, &d.envelope, duration, dt))
        .collect::<Result<Vec<_>>>()?;
    integrate_body(config, fields)
}

/// Rigid-body integration under the hydrodynamic forces of recorded fin fields.
pub fn integrate_body(config: &RobotConfig, fields: Vec<FinField>) -> Result<SwimResult> {
    let dt = fields[0].dt;
    let frames = fields.iter().map(|f| f.frames.len()).min().unwrap_or(0);
    let hydro = &config.hydro;
    let added = hydro.added_mass_coeff.as_array();
    let mass = [0, 1, 2].map(|k| config.body_mass * (1.0 + added[k]));

    // Fin kinematics at frame n, or halfway to n + 1.
    let mut tips: Vec<Vec<f64>> = fields.iter().map(|f| vec![0.0; f.ray_count()]).collect();
    let mut vels = tips.clone();
    let mut wrench_at = |n: usize, half: bool, body: &BodyVelocity| {
        for (k, f) in fields.iter().enumerate() {
            for i in 0..f.ray_count() {
                if half {
                    tips[k][i] = 0.5 * (f.frames[n][i] + f.frames[n + 1][i]);
                    vels[k][i] = 0.5 * (f.velocity(n, i) + f.velocity(n + 1, i));
                } else {
                    tips[k][i] = f.frames[n][i];
                    vels[k][i] = f.velocity(n, i);
                }
            }
        }
        let kin: Vec<FinKinematics> = tips
            .iter()
            .zip(&vels)
            .map(|(t, v)| FinKinematics {
                tips: t,
                tip_velocities: v,
            })
            .collect();
        net_wrench(&kin, body, config)
    };
    let body_of = |y: &[f64; 8]| BodyVelocity {
        linear: [y[4], y[5], y[6]],
        yaw_rate: y[7],
    };

    let mut y = [0.0f64; 8];
    let mut trajectory = Vec::with_capacity(frames);
    let push = |y: &[f64; 8], n: usize, out: &mut Vec<RobotState>| {
        out.push(RobotState {
            position: [y[0], y[1], y[2]],
            yaw: y[3],
            velocity: [y[4], y[5], y[6]],
            yaw_rate: y[7],
            time: n as f64 * dt,
        });
    };
    push(&y, 0, &mut trajectory);
    for n in 0..frames.saturating_sub(1) {
        let k1 = body_rates(&y, &wrench_at(n, false, &body_of(&y)), &mass, hydro.yaw_inertia);
        let y2 = stage(&y, &k1, 0.5 * dt);
        let k2 = body_rates(&y2, &wrench_at(n, true, &body_of(&y2)), &mass, hydro.yaw_inertia);
        let y3 = stage(&y, &k2, 0.5 * dt);
        let k3 = body_rates(&y3, &wrench_at(n, true, &body_of(&y3)), &mass, hydro.yaw_inertia);
        let y4 = stage(&y, &k3, dt);
        let k4 = body_rates(&y4, &wrench_at(n + 1, false, &body_of(&y4)), &mass, hydro.yaw_inertia);
        for j in 0..8 {
            y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: n + 1,
                time: (n + 1) as f64 * dt,
            });
        }
        push(&y, n + 1, &mut trajectory);
    }

    let steady = &trajectory[trajectory.len() / 2..];
    let count = steady.len() as f64;
    let mut mean_velocity = [0.0; 3];
    let mut peak_velocity = [0.0f64; 3];
    let (mut mean_yaw_rate, mut peak_yaw_rate) = (0.0, 0.0f64);
    for s in steady {
        for k in 0..3 {
            mean_velocity[k] += s.velocity[k] / count;
            peak_velocity[k] = peak_velocity[k].max(s.velocity[k].abs());
        }
        mean_yaw_rate += s.yaw_rate / count;
        peak_yaw_rate = peak_yaw_rate.max(s.yaw_rate.abs());
    }
    Ok(SwimResult {
        trajectory,
        mean_velocity,
        peak_velocity,
        mean_yaw_rate,
        peak_yaw_rate,
        fin_fields: fields,
    })
}

fn stage(y: &[f64; 8], k: &[f64; 8], h: f64) -> [f64; 8] {
    let mut out = *y;
    for j in 0..8 {
        out[j] += h * k[j];
    }
    out
}

pub fn strouhal(frequency: f64, a_pkpk: f64, speed: f64) -> Result<f64> {
    if !(speed > 0.0) {
        return Err(Error::Domain(format!("Strouhal number undefined for speed {speed} m/s")));
    }
    Ok(frequency * a_pkpk / speed)
}

pub fn specific_wavelength(wavelength: f64, a_mean: f64) -> Result<f64> {
    if !(a_mean > 0.0) {
        return Err(Error::Domain(format!(
            "specific wavelength undefined for mean amplitude {a_mean} m"
        )));
    }
    Ok(wavelength / a_mean)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// `None` when the mean surge speed is not positive.
    pub strouhal: Option<f64>,
    /// `None` when the fin does not move.
    pub specific_wavelength: Option<f64>,
    pub electrical_power: f64,
    pub a_pkpk: f64,
    pub a_mean: f64,
    pub mean_surge_speed: f64,
}

impl Metrics {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        let mut t = Table::new(&[
            "strouhal", "specific_wavelength", "electrical_power_w", "a_pkpk_m", "a_mean_m", "surge_speed_mps",
        ]);
        t.row(&[
            opt(self.strouhal),
            opt(self.specific_wavelength),
            num(self.electrical_power),
            num(self.a_pkpk),
            num(self.a_mean),
            num(self.mean_surge_speed),
        ]);
        t.render()
    }
}

/// Time-and-ray mean of `|u − ū|` over the steady half, times `correction`.
pub fn mean_amplitude(field: &FinField, correction: f64) -> f64 {
    let frames = &field.frames[field.frames.len() / 2..];
    if frames.is_empty() {
        return 0.0;
    }
    let rays = field.ray_count();
    let count = frames.len() as f64;
    let mut total = 0.0;
    for i in 0..rays {
        let mean = frames.iter().map(|f| f[i]).sum::<f64>() / count;
        total += frames.iter().map(|f| (f[i] - mean).abs()).sum::<f64>() / count;
    }
    correction * total / rays as f64
}

/// Mean square of the unit drive waveform over one period.
pub fn unit_mean_square(waveform: Waveform) -> f64 {
    match waveform {
        Waveform::Sine => 0.5,
        Waveform::Square { duty, mode } => match mode {
            SquareMode::Bipolar => 1.0,
            SquareMode::PullOnly | SquareMode::PushOnly => duty,
        },
    }
}

/// Electrical power of all coils: `Σ I_rms²·(R_coil + R_supply)·overhead`.
pub fn electrical_power(config: &RobotConfig, drives: &[FinDrive]) -> f64 {
    let limits = &config.drive_limits;
    config
        .fins
        .iter()
        .zip(drives)
        .map(|(fin, d)| {
            let r = fin.ray.vca.coil_resistance + limits.supply_resistance;
            let ms = unit_mean_square(d.plan.waveform);
            d.envelope
                .per_ray_power
                .iter()
                .map(|&p| {
                    let amp = d.plan.power_semantics.current_scale(p) * d.plan.current_amplitude;
                    crate::actuator::coil_power((amp * amp * ms).sqrt(), r)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        * limits.power_overhead
}

/// Swimming metrics of a run; fin amplitudes come from `field`, the robot's
/// power from every fin drive.
pub fn swim_metrics(
    result: &SwimResult,
    field: &FinField,
    plan: &WavePlan,
    config: &RobotConfig,
    drives: &[FinDrive],
    correction: f64,
) -> Result<Metrics> {
    let a_pkpk = field.max_peak_to_peak(plan.frequency)?;
    let a_mean = mean_amplitude(field, correction);
    let speed = result.mean_velocity[0];
    Ok(Metrics {
        strouhal: strouhal(plan.frequency, a_pkpk, speed).ok(),
        specific_wavelength: specific_wavelength(plan.wavelength, a_mean).ok(),
        electrical_power: electrical_power(config, drives),
        a_pkpk,
        a_mean,
        mean_surge_speed: speed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::Direction;
    use crate::model::{preset, PresetName};
    use approx::assert_relative_eq;

    fn cuttlebot() -> RobotConfig {
        preset(PresetName::Cuttlebot)
    }

    fn strip(side: FinSide) -> Element {
        let mut fin = cuttlebot().fins[0].clone();
        fin.side = side;
        Element {
            frame: FinFrame::of(&fin),
            position: 0.0525,
            width: 0.035,
            span: 0.033,
        }
    }

    #[test]
    fn no_relative_motion_no_force() {
        let w = element_wrench(&ElementMotion::default(), &BodyVelocity::default(), &strip(FinSide::Left), &cuttlebot().hydro);
        assert_eq!(w, Wrench::default());
    }

    #[test]
    fn odd_in_normal_velocity() {
        let h = cuttlebot().hydro;
        let m = ElementMotion { tip_deflection: 0.0, tip_velocity: 0.2, tip_slope: 0.3 };
        let a = element_wrench(&m, &BodyVelocity::default(), &strip(FinSide::Left), &h);
        let b = element_wrench(&ElementMotion { tip_velocity: -0.2, ..m }, &BodyVelocity::default(), &strip(FinSide::Left), &h);
        for k in 0..3 {
            assert_eq!(a.force[k], -b.force[k]);
        }
        assert_eq!(a.yaw_torque, -b.yaw_torque);
        // Tip rising where the edge slopes up toward the head: water is pushed
        // tailward and the body forward.
        assert!(a.force[0] > 0.0);
    }

    #[test]
    fn linear_in_area() {
        let h = cuttlebot().hydro;
        let m = ElementMotion { tip_deflection: 0.01, tip_velocity: 0.2, tip_slope: -0.4 };
        let body = BodyVelocity { linear: [0.05, 0.0, 0.01], yaw_rate: 0.0 };
        let e = strip(FinSide::Right);
        let a = element_wrench(&m, &body, &e, &h);
        let b = element_wrench(&m, &body, &Element { width: 2.0 * e.width, ..e }, &h);
        for k in 0..3 {
            assert_relative_eq!(b.force[k], 2.0 * a.force[k], max_relative = 1e-14);
        }
    }

    #[test]
    fn single_element_force_by_hand() {
        // Flat strip moving straight up at 0.1 m/s: F = −½ρC·A·v² along z.
        let cfg = cuttlebot();
        let mut h = cfg.hydro.clone();
        h.thrust_gain = 1.0;
        let body = BodyVelocity { linear: [0.0, 0.0, 0.1], yaw_rate: 0.0 };
        let w = element_wrench(&ElementMotion::default(), &body, &strip(FinSide::Left), &h);
        let expected = -0.5 * h.water_density * h.normal_drag_coeff * 0.035 * 0.033 * 0.01;
        assert_relative_eq!(w.force[2], expected, max_relative = 1e-12);
        assert_eq!(w.force[0], 0.0);
    }

    #[test]
    fn body_drag_opposes_motion() {
        let h = cuttlebot().hydro;
        let d = body_drag(&BodyVelocity { linear: [0.06, -0.02, 0.0], yaw_rate: 0.5 }, &h);
        assert!(d.force[0] < 0.0 && d.force[1] > 0.0 && d.force[2] == 0.0 && d.yaw_torque < 0.0);
    }

    #[test]
    fn symmetric_fins_give_no_sway_or_yaw() {
        let cfg = cuttlebot();
        let tips = [0.01, -0.004, 0.002, 0.015];
        let vels = [0.1, 0.3, -0.2, 0.05];
        let kin = FinKinematics { tips: &tips, tip_velocities: &vels };
        let w = net_wrench(&[kin, kin], &BodyVelocity::default(), &cfg);
        assert!(w.force[1].abs() < 1e-12);
        assert!(w.yaw_torque.abs() < 1e-12);
    }

    fn drives(left: Direction, right: Direction, f: f64) -> Vec<FinDrive> {
        [left, right]
            .into_iter()
            .map(|d| FinDrive::uniform(WavePlan::sine(0.212, 0.2625, f, d), 4))
            .collect()
    }

    fn mean_wrench(cfg: &RobotConfig, drives: &[FinDrive]) -> Wrench {
        let fields: Vec<FinField> = cfg
            .fins
            .iter()
            .zip(drives)
            .map(|(fin, d)| simulate_fin(fin, &d.plan, &d.envelope, 10.0, 1e-3).unwrap())
            .collect();
        let half = fields[0].frames.len() / 2;
        let count = (fields[0].frames.len() - half) as f64;
        let mut acc = Wrench::default();
        for n in half..fields[0].frames.len() {
            let kin: Vec<FinKinematics> = fields
                .iter()
                .map(|f| FinKinematics { tips: &f.frames[n], tip_velocities: &f.velocities[n] })
                .collect();
            acc = acc + net_wrench(&kin, &BodyVelocity::default(), cfg).scaled(1.0 / count);
        }
        acc
    }

    #[test]
    fn wave_direction_sets_thrust_sign() {
        let cfg = cuttlebot();
        let back = mean_wrench(&cfg, &drives(Direction::Backward, Direction::Backward, 2.0));
        let fwd = mean_wrench(&cfg, &drives(Direction::Forward, Direction::Forward, 2.0));
        assert!(back.force[0] > 0.0, "{back:?}");
        assert!(fwd.force[0] < 0.0, "{fwd:?}");
    }

    #[test]
    fn opposed_waves_turn_in_place() {
        let cfg = cuttlebot();
        let ccw = mean_wrench(&cfg, &drives(Direction::Forward, Direction::Backward, 1.5));
        let cw = mean_wrench(&cfg, &drives(Direction::Backward, Direction::Forward, 1.5));
        // Right fin pushing forward, left fin pushing backward: counter-clockwise.
        assert!(ccw.yaw_torque > 0.0 && cw.yaw_torque < 0.0);
        assert_relative_eq!(ccw.yaw_torque, -cw.yaw_torque, max_relative = 1e-9);
        let scale = ccw.yaw_torque.abs() / cfg.body_width;
        assert!(ccw.force[0].abs() < 0.05 * scale, "{ccw:?}");
    }

    #[test]
    fn rest_stays_rest() {
        let cfg = cuttlebot();
        let mut d = drives(Direction::Backward, Direction::Backward, 1.0);
        for x in &mut d {
            x.plan.current_amplitude = 0.0;
        }
        let r = simulate_swim(&cfg, &d, 20.0, 2e-3).unwrap();
        assert!(r.trajectory.iter().all(|s| s.position == [0.0; 3] && s.yaw == 0.0));
    }

    #[test]
    fn swim_preconditions() {
        let cfg = cuttlebot();
        let d = drives(Direction::Backward, Direction::Backward, 1.0);
        assert!(simulate_swim(&cfg, &d, 10.0, 1e-3).is_err());
        assert!(simulate_swim(&cfg, &d[..1], 20.0, 1e-3).is_err());
    }

    #[test]
    fn kinematic_formulas() {
        assert_eq!(strouhal(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(strouhal(2.0, 0.0, 0.1).unwrap(), 0.0);
        assert!(strouhal(2.0, 0.01, 0.0).is_err());
        assert_relative_eq!(strouhal(2.0, 0.02416, 0.0604).unwrap(), 0.8, epsilon = 1e-9);
        assert_eq!(specific_wavelength(20.0, 1.0).unwrap(), 20.0);
        assert_relative_eq!(specific_wavelength(0.2625, 0.012).unwrap(), 21.875, epsilon = 1e-12);
        assert_eq!(specific_wavelength(0.3, 0.3).unwrap(), 1.0);
        assert!(specific_wavelength(0.3, 0.0).is_err());
    }

    #[test]
    fn mean_amplitude_of_a_sine() {
        let frames: Vec<Vec<f64>> = (0..10_000)
            .map(|n| vec![0.012 * (std::f64::consts::TAU * 2.0 * n as f64 * 1e-3).sin() - 0.003])
            .collect();
        let field = FinField::new(vec![0.0], 1e-3, frames);
        assert_relative_eq!(mean_amplitude(&field, RECTIFIED_SINE_CORRECTION), 0.012, max_relative = 1e-3);
        assert_relative_eq!(mean_amplitude(&field, 1.0), 0.024 / std::f64::consts::PI, max_relative = 1e-3);
    }

    #[test]
    fn power_scales_with_envelope() {
        let cfg = cuttlebot();
        let full = drives(Direction::Backward, Direction::Backward, 2.0);
        let p = electrical_power(&cfg, &full);
        assert_relative_eq!(p, 11.8, max_relative = 1e-4);
        let mut half = full.clone();
        for d in &mut half {
            d.envelope = EnvelopeSpec { per_ray_power: vec![0.0, 0.0, 1.0, 1.0] };
        }
        assert_relative_eq!(electrical_power(&cfg, &half), p / 2.0, max_relative = 1e-12);
    }
}
