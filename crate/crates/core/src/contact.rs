//! Penalty wall and end-effector force sensor.
//!
//! The tool spring `K_u` and the surface `K_e` act in series. Restitution is
//! realised by a Kelvin-Voigt damper whose force is clamped at zero, so the
//! wall can push but never pull. The damping coefficient is chosen so that
//! the clamped model, not the textbook linear oscillator, rebounds with the
//! configured ratio.

use nalgebra::UnitQuaternion;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Vec3, Wrench};

/// Tangential speed below which friction scales linearly with slip.
const FRICTION_SLIP_SPEED: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContactError {
    #[error("invalid surface `{label}`: {reason}")]
    InvalidSurface { label: String, reason: String },
    #[error("invalid end effector: {0}")]
    InvalidEndEffector(String),
    #[error("restitution must lie in (0, 1], got {0}")]
    InvalidRestitution(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceModel {
    pub plane_point: Vec3,
    /// Unit normal pointing out of the wall into free space.
    pub normal: Vec3,
    /// Surface stiffness `K_e` [N/m].
    pub stiffness: f64,
    /// Coefficient of restitution `e`.
    pub restitution: f64,
    pub friction: f64,
    pub label: String,
}

impl SurfaceModel {
    pub fn validate(&self) -> Result<(), ContactError> {
        let bad = |reason: String| {
            Err(ContactError::InvalidSurface {
                label: self.label.clone(),
                reason,
            })
        };
        if (self.normal.norm() - 1.0).abs() > 1e-12 {
            return bad(format!("normal has norm {}", self.normal.norm()));
        }
        if !(self.stiffness > 0.0 && self.stiffness.is_finite()) {
            return bad(format!("stiffness must be positive, got {}", self.stiffness));
        }
        if !(self.restitution > 0.0 && self.restitution <= 1.0) {
            return bad(format!("restitution must lie in (0, 1], got {}", self.restitution));
        }
        if !(self.friction >= 0.0) {
            return bad(format!("friction must be non-negative, got {}", self.friction));
        }
        if !self.plane_point.iter().all(|v| v.is_finite()) {
            return bad("plane point is not finite".into());
        }
        Ok(())
    }

    /// Signed distance of `point` from the wall, positive in free space.
    pub fn distance(&self, point: &Vec3) -> f64 {
        (point - self.plane_point).dot(&self.normal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndEffectorModel {
    /// Tool spring `K_u` [N/m].
    pub tool_stiffness: f64,
    pub sensor_noise_sigma: f64,
    /// Body-frame sensing direction, pointing from the arm root to the tip.
    pub sensor_axis: Vec3,
}

impl EndEffectorModel {
    pub fn validate(&self) -> Result<(), ContactError> {
        if !(self.tool_stiffness > 0.0 && self.tool_stiffness.is_finite()) {
            return Err(ContactError::InvalidEndEffector(format!(
                "tool stiffness must be positive, got {}",
                self.tool_stiffness
            )));
        }
        if !(self.sensor_noise_sigma >= 0.0) {
            return Err(ContactError::InvalidEndEffector("sensor noise must be non-negative".into()));
        }
        if (self.sensor_axis.norm() - 1.0).abs() > 1e-12 {
            return Err(ContactError::InvalidEndEffector("sensor axis must be a unit vector".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactReport {
    pub in_contact: bool,
    pub penetration: f64,
    pub normal_force: f64,
    /// Force read by the 1-D sensor, compression positive, noise included.
    pub sensed_force: f64,
    /// Force and zero moment applied to the arm tip, world axes.
    pub wrench_world: Wrench,
}

/// Series stiffness of two springs.
pub fn series_stiffness(tool: f64, surface: f64) -> f64 {
    tool * surface / (tool + surface)
}

/// Rebound ratio of a unit-mass, unit-stiffness Kelvin-Voigt contact with
/// damping ratio `zeta` whose total force is clamped at zero.
pub fn clamped_restitution(zeta: f64) -> f64 {
    if zeta <= 0.0 {
        return 1.0;
    }
    if (zeta - 1.0).abs() < 1e-9 {
        return (-2.0f64).exp();
    }
    if zeta < 1.0 {
        let wd = (1.0 - zeta * zeta).sqrt();
        let theta = std::f64::consts::PI - (2.0 * zeta * wd).atan2(1.0 - 2.0 * zeta * zeta);
        let decay = (-zeta * theta / wd).exp();
        -decay * (theta.cos() - zeta * theta.sin() / wd)
    } else {
        let root = (zeta * zeta - 1.0).sqrt();
        let (s1, s2) = (-zeta + root, -zeta - root);
        let t = 2.0 * (s2 / s1).ln() / (s1 - s2);
        -(s1 * (s1 * t).exp() - s2 * (s2 * t).exp()) / (s1 - s2)
    }
}

/// Inverse of [`clamped_restitution`].
pub fn damping_ratio_for_restitution(e: f64) -> Result<f64, ContactError> {
    if !(e > 0.0 && e <= 1.0) {
        return Err(ContactError::InvalidRestitution(e));
    }
    if e == 1.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while clamped_restitution(hi) > e {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clamped_restitution(mid) > e {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Damping ratio of the unclamped linear oscillator with the same half-cycle
/// decay, `−ln e / √(π² + ln² e)`. Overstates rebound once the force is
/// clamped; kept for comparison.
pub fn linear_damping_ratio(e: f64) -> f64 {
    let l = e.ln();
    -l / (std::f64::consts::PI * std::f64::consts::PI + l * l).sqrt()
}

/// Kelvin-Voigt damping coefficient giving rebound ratio `e` for a free mass
/// `effective_mass` hitting a spring of stiffness `k_s`.
pub fn restitution_to_damping(e: f64, effective_mass: f64, k_s: f64) -> Result<f64, ContactError> {
    let zeta = damping_ratio_for_restitution(e)?;
    Ok(2.0 * zeta * (k_s * effective_mass).sqrt())
}

/// A surface and end effector with the damping resolved for one effective mass.
#[derive(Debug, Clone)]
pub struct ContactModel {
    pub surface: SurfaceModel,
    pub end_effector: EndEffectorModel,
    pub series_stiffness: f64,
    pub damping: f64,
    noise: Option<Normal<f64>>,
}

impl ContactModel {
    pub fn new(surface: SurfaceModel, end_effector: EndEffectorModel, effective_mass: f64) -> Result<Self, ContactError> {
        surface.validate()?;
        end_effector.validate()?;
        let k_s = series_stiffness(end_effector.tool_stiffness, surface.stiffness);
        let damping = restitution_to_damping(surface.restitution, effective_mass, k_s)?;
        let noise = (end_effector.sensor_noise_sigma > 0.0)
            .then(|| Normal::new(0.0, end_effector.sensor_noise_sigma).expect("sigma checked non-negative"));
        Ok(Self {
            surface,
            end_effector,
            series_stiffness: k_s,
            damping,
            noise,
        })
    }

    /// Evaluates the wall at the arm tip and samples the sensor.
    pub fn evaluate<R: Rng + ?Sized>(
        &self,
        op_position: &Vec3,
        op_velocity: &Vec3,
        orientation: &UnitQuaternion<f64>,
        rng: &mut R,
    ) -> ContactReport {
        let noise = self.sample_noise(rng);
        let mut report = self.evaluate_exact(op_position, op_velocity, orientation);
        report.sensed_force += noise;
        report
    }

    /// One draw of sensor noise.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.noise.map_or(0.0, |n| n.sample(rng))
    }

    /// Noise-free evaluation.
    pub fn evaluate_exact(&self, op_position: &Vec3, op_velocity: &Vec3, orientation: &UnitQuaternion<f64>) -> ContactReport {
        let penetration = (-self.surface.distance(op_position)).max(0.0);
        if penetration <= 0.0 {
            return ContactReport {
                in_contact: false,
                penetration: 0.0,
                normal_force: 0.0,
                sensed_force: 0.0,
                wrench_world: Wrench::zeros(),
            };
        }

        let n = self.surface.normal;
        let penetration_rate = -op_velocity.dot(&n);
        let normal_force = (self.series_stiffness * penetration + self.damping * penetration_rate).max(0.0);

        let tangential = op_velocity - n * op_velocity.dot(&n);
        let friction = -tangential * (self.surface.friction * normal_force / tangential.norm().max(FRICTION_SLIP_SPEED));
        let force = n * normal_force + friction;

        let axis_world = orientation * self.end_effector.sensor_axis;
        ContactReport {
            in_contact: true,
            penetration,
            normal_force,
            sensed_force: -force.dot(&axis_world),
            wrench_world: Wrench::new(force.x, force.y, force.z, 0.0, 0.0, 0.0),
        }
    }
}
