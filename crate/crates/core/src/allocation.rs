//! Tilted-rotor mixing for the fully-actuated hexrotor.
//!
//! Six rotors sit on a circle of radius `d`, rotor `i` at azimuth
//! `φ_i = i·60°` (numbered clockwise seen from above). Each rotor is canted
//! about its own arm by `±α`, the sign alternating between neighbours together
//! with the spin direction. The mixing matrix `M_α` maps squared rotor speeds
//! `ω²` to the body wrench at the centre of mass; column `i` is
//!
//! ```text
//! [ s_i c_f sinφ_i sinα,
//!   s_i c_f cosφ_i sinα,
//!   c_f cosα,
//!   sinφ_i (c_q sinα − d c_f cosα),
//!   cosφ_i (c_q sinα − d c_f cosα),
//!   s_i (c_q cosα + d c_f sinα) ]        with s_i = (−1)^(i+1)
//! ```
//!
//! The matrix is assembled here from rotor positions, thrust axes and drag
//! torques rather than from the closed form above, so the unit tests can use
//! the closed form as an independent check.

use nalgebra::{Matrix6, SVD, Vector6};
use serde::{Deserialize, Serialize};

use crate::{Vec3, Wrench};

pub const ROTOR_COUNT: usize = 6;

/// Headings sampled when searching for the weakest lateral direction.
const LATERAL_HEADINGS: usize = 72;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllocationError {
    #[error("invalid actuator geometry: {0}")]
    InvalidGeometry(String),
    #[error("mixing matrix is singular (rank {rank} < 6)")]
    SingularMixing { rank: usize },
    #[error("no cant angle in the sweep reaches {target:.3} N of lateral force")]
    Infeasible { target: f64 },
    #[error("invalid cant sweep: {0}")]
    InvalidSweep(String),
}

/// Rotor layout and propeller constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorGeometry {
    /// Arm length from the centre of mass to each rotor hub [m].
    pub radius: f64,
    /// Rotor azimuths `φ_i` [rad].
    pub rotor_angles: [f64; ROTOR_COUNT],
    /// Cant magnitude `α` [rad]; the applied tilt is `spin_signs[i]·α`.
    pub cant: f64,
    /// Thrust constant `c_f` [N·s²].
    pub thrust_constant: f64,
    /// Drag-torque constant `c_q` [N·m·s²].
    pub torque_constant: f64,
    /// Spin and cant direction of each rotor, `(−1)^(i+1)`.
    pub spin_signs: [f64; ROTOR_COUNT],
}

impl ActuatorGeometry {
    /// Standard hexrotor: azimuths `i·60°`, alternating spin and cant.
    pub fn hexrotor(radius: f64, cant: f64, thrust_constant: f64, torque_constant: f64) -> Self {
        let mut rotor_angles = [0.0; ROTOR_COUNT];
        let mut spin_signs = [0.0; ROTOR_COUNT];
        for i in 0..ROTOR_COUNT {
            rotor_angles[i] = ((i + 1) as f64 * 60.0).to_radians();
            spin_signs[i] = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        Self {
            radius,
            rotor_angles,
            cant,
            thrust_constant,
            torque_constant,
            spin_signs,
        }
    }

    pub fn with_cant(&self, cant: f64) -> Self {
        Self {
            cant,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), AllocationError> {
        let bad = |msg: String| Err(AllocationError::InvalidGeometry(msg));
        if !(self.radius > 0.0) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.thrust_constant > 0.0) || !(self.torque_constant > 0.0) {
            return bad("thrust and torque constants must be positive".into());
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.cant) {
            return bad(format!("cant angle {} rad outside [0, π/2)", self.cant));
        }
        for i in 0..ROTOR_COUNT {
            let next = (i + 1) % ROTOR_COUNT;
            let gap = (self.rotor_angles[next] - self.rotor_angles[i]).rem_euclid(std::f64::consts::TAU);
            if (gap - std::f64::consts::FRAC_PI_3).abs() > 1e-9 {
                return bad(format!("rotors {} and {} are not 60° apart", i + 1, next + 1));
            }
            if self.spin_signs[i].abs() != 1.0 || self.spin_signs[i] == self.spin_signs[next] {
                return bad("spin signs must alternate between ±1".into());
            }
        }
        Ok(())
    }

    /// Hub position of rotor `i` in the body frame.
    pub fn rotor_position(&self, i: usize) -> Vec3 {
        let phi = self.rotor_angles[i];
        Vec3::new(phi.cos(), -phi.sin(), 0.0) * self.radius
    }

    /// Unit thrust axis of rotor `i` in the body frame.
    pub fn thrust_axis(&self, i: usize) -> Vec3 {
        let phi = self.rotor_angles[i];
        let tilt = self.spin_signs[i] * self.cant;
        Vec3::new(phi.sin(), phi.cos(), 0.0) * tilt.sin() + Vec3::z() * tilt.cos()
    }
}

/// Rotor speed bound, expressed on the squared speed the mixer works with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedLimits {
    pub max_squared_speed: f64,
}

impl SpeedLimits {
    pub fn from_max_speed(max_speed: f64) -> Self {
        Self {
            max_squared_speed: max_speed * max_speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    pub entries: Matrix6<f64>,
    pub rank: usize,
    /// Ratio of extreme singular values; infinite when rank-deficient.
    pub condition_number: f64,
    inverse: Option<Matrix6<f64>>,
}

impl MixingMatrix {
    pub fn is_full_rank(&self) -> bool {
        self.rank == ROTOR_COUNT
    }

    pub fn inverse(&self) -> Option<&Matrix6<f64>> {
        self.inverse.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotorCommand {
    /// Squared rotor speeds ω² [rad²/s²].
    pub squared_speeds: Vector6<f64>,
    /// Set when any rotor had to be clamped to `[0, ω²_max]`.
    pub saturated: bool,
}

impl RotorCommand {
    pub fn new(squared_speeds: Vector6<f64>) -> Self {
        Self {
            squared_speeds,
            saturated: false,
        }
    }

    pub fn idle() -> Self {
        Self::new(Vector6::zeros())
    }
}

pub fn build_mixing_matrix(geom: &ActuatorGeometry) -> MixingMatrix {
    let mut entries = Matrix6::zeros();
    for i in 0..ROTOR_COUNT {
        let axis = geom.thrust_axis(i);
        let force = axis * geom.thrust_constant;
        let torque = geom.rotor_position(i).cross(&force)
            + axis * (geom.spin_signs[i] * geom.torque_constant);
        entries.fixed_view_mut::<3, 1>(0, i).copy_from(&force);
        entries.fixed_view_mut::<3, 1>(3, i).copy_from(&torque);
    }

    let singular = SVD::new(entries, false, false).singular_values;
    let largest = singular.max();
    let smallest = singular.min();
    let rank = singular.iter().filter(|&&s| s > largest * 1e-10).count();
    let condition_number = if rank == ROTOR_COUNT {
        largest / smallest
    } else {
        f64::INFINITY
    };
    let inverse = if rank == ROTOR_COUNT {
        entries.try_inverse()
    } else {
        None
    };

    MixingMatrix {
        entries,
        rank,
        condition_number,
        inverse,
    }
}

/// Body wrench produced by the given squared speeds.
pub fn wrench_from_speeds(mixing: &MixingMatrix, cmd: &RotorCommand) -> Wrench {
    mixing.entries * cmd.squared_speeds
}

/// Solves `M_α ω² = wrench` and clamps the solution into `[0, ω²_max]`.
pub fn speeds_from_wrench(
    mixing: &MixingMatrix,
    wrench: &Wrench,
    limits: SpeedLimits,
) -> Result<RotorCommand, AllocationError> {
    let inverse = mixing
        .inverse
        .as_ref()
        .ok_or(AllocationError::SingularMixing { rank: mixing.rank })?;
    let raw = inverse * wrench;
    let mut saturated = false;
    let squared_speeds = raw.map(|w2| {
        let clamped = w2.clamp(0.0, limits.max_squared_speed);
        if clamped != w2 {
            saturated = true;
        }
        clamped
    });
    Ok(RotorCommand {
        squared_speeds,
        saturated,
    })
}

/// Largest vertical force with every rotor at the speed limit.
pub fn max_lift(geom: &ActuatorGeometry, limits: SpeedLimits) -> f64 {
    let mixing = build_mixing_matrix(geom);
    mixing.entries.row(2).sum() * limits.max_squared_speed
}

/// Lateral force the vehicle can add in its weakest horizontal direction
/// while still carrying `hover_weight` with zero net torque and every rotor
/// inside `[0, ω²_max]`. Zero when the geometry cannot hover or is singular.
pub fn lateral_capacity(geom: &ActuatorGeometry, limits: SpeedLimits, hover_weight: f64) -> f64 {
    let mixing = build_mixing_matrix(geom);
    let Some(inverse) = mixing.inverse() else {
        return 0.0;
    };
    let hover = inverse * Wrench::new(0.0, 0.0, hover_weight, 0.0, 0.0, 0.0);
    if hover.iter().any(|&h| h < 0.0 || h > limits.max_squared_speed) {
        return 0.0;
    }

    (0..LATERAL_HEADINGS)
        .map(|k| {
            let heading = std::f64::consts::TAU * k as f64 / LATERAL_HEADINGS as f64;
            let per_newton = inverse * Wrench::new(heading.cos(), heading.sin(), 0.0, 0.0, 0.0, 0.0);
            hover
                .iter()
                .zip(per_newton.iter())
                .filter_map(|(&h, &g)| {
                    if g > 1e-15 {
                        Some((limits.max_squared_speed - h) / g)
                    } else if g < -1e-15 {
                        Some(h / -g)
                    } else {
                        None
                    }
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Grid over candidate cant angles, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CantSweep {
    pub start_deg: f64,
    pub end_deg: f64,
    pub step_deg: f64,
}

impl Default for CantSweep {
    fn default() -> Self {
        Self {
            start_deg: 0.0,
            end_deg: 60.0,
            step_deg: 0.5,
        }
    }
}

impl CantSweep {
    pub fn angles_deg(&self) -> Result<Vec<f64>, AllocationError> {
        if !(self.step_deg > 0.0) || !(self.end_deg >= self.start_deg) || self.start_deg < 0.0 || self.end_deg >= 90.0 {
            return Err(AllocationError::InvalidSweep(format!("{self:?}")));
        }
        let count = ((self.end_deg - self.start_deg) / self.step_deg + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| self.start_deg + k as f64 * self.step_deg).collect())
    }
}

/// One evaluated point of the cant sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantCandidate {
    pub cant_deg: f64,
    pub lateral_capacity: f64,
    pub max_lift: f64,
}

pub fn evaluate_cant(template: &ActuatorGeometry, limits: SpeedLimits, hover_weight: f64, cant_deg: f64) -> CantCandidate {
    let geom = template.with_cant(cant_deg.to_radians());
    CantCandidate {
        cant_deg,
        lateral_capacity: lateral_capacity(&geom, limits, hover_weight),
        max_lift: max_lift(&geom, limits),
    }
}

/// Picks the sweep angle with the most lift among those whose lateral
/// capacity reaches `lateral_target`. Ties go to the smaller angle.
pub fn optimize_cant_angle(
    template: &ActuatorGeometry,
    limits: SpeedLimits,
    hover_weight: f64,
    lateral_target: f64,
    sweep: CantSweep,
) -> Result<CantCandidate, AllocationError> {
    if !(lateral_target >= 0.0) {
        return Err(AllocationError::InvalidSweep(format!(
            "lateral target must be non-negative, got {lateral_target}"
        )));
    }
    let mut best: Option<CantCandidate> = None;
    for cant_deg in sweep.angles_deg()? {
        let candidate = evaluate_cant(template, limits, hover_weight, cant_deg);
        if candidate.lateral_capacity < lateral_target {
            continue;
        }
        if best.is_none_or(|b| candidate.max_lift > b.max_lift) {
            best = Some(candidate);
        }
    }
    best.ok_or(AllocationError::Infeasible { target: lateral_target })
}
