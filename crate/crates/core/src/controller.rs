//! Hybrid approach / impact / contact controller.
//!
//! All commands are built at the arm tip in body axes, where `y` points along
//! the arm toward the surface. Each step produces
//!
//! ```text
//! F_op = Ω̃·force + Ω·Λ·a_motion + bias
//! ```
//!
//! and the result is moved to the centre of mass for allocation. During
//! approach and retreat every axis is motion-controlled; during impact and
//! contact the normal axis switches to the force channel.

use nalgebra::{Matrix6, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, InertialModel, RigidBodyState};
use crate::task_space::{self, TaskSpec};
use crate::{Vec3, Wrench};

/// Index of the surface-normal axis in op-frame wrenches.
pub const NORMAL_AXIS: usize = 1;

/// Fraction of `v_i` below which the impact is considered dissipated.
const DISSIPATED_FRACTION: f64 = 0.02;

/// Loss-of-contact threshold as a fraction of the detection threshold.
const THRESHOLD_OFF_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("illegal phase transition {from:?} -> {to:?}")]
    IllegalTransition { from: ControllerPhase, to: ControllerPhase },
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("invalid setpoints: {0}")]
    InvalidSetpoints(String),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    TaskSpace(#[from] task_space::TaskSpaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerPhase {
    Approach,
    Impact,
    Contact,
    Retreat,
}

impl ControllerPhase {
    pub fn name(self) -> &'static str {
        match self {
            Self::Approach => "approach",
            Self::Impact => "impact",
            Self::Contact => "contact",
            Self::Retreat => "retreat",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::Approach, Self::Impact, Self::Contact, Self::Retreat]
            .into_iter()
            .find(|p| p.name() == name)
    }

    fn uses_force_channel(self) -> bool {
        matches!(self, Self::Impact | Self::Contact)
    }
}

/// Rejects every edge outside Approach → Impact → Contact → Retreat.
pub fn check_transition(from: ControllerPhase, to: ControllerPhase) -> Result<(), ControllerError> {
    use ControllerPhase::*;
    match (from, to) {
        (Approach, Impact) | (Impact, Contact) | (Contact, Retreat) => Ok(()),
        _ => Err(ControllerError::IllegalTransition { from, to }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub phase: ControllerPhase,
    pub entry_time: f64,
    /// Normal velocity when contact was first detected.
    pub v_i: Option<f64>,
    /// Sensed force when the current phase was entered.
    pub entry_force: f64,
    /// Set once the retreat has run its course.
    pub finished: bool,
}

impl PhaseState {
    pub fn initial() -> Self {
        Self {
            phase: ControllerPhase::Approach,
            entry_time: 0.0,
            v_i: None,
            entry_force: 0.0,
            finished: false,
        }
    }

    fn enter(&self, phase: ControllerPhase, time: f64, force: f64) -> Result<Self, ControllerError> {
        check_transition(self.phase, phase)?;
        Ok(Self {
            phase,
            entry_time: time,
            entry_force: force,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: [f64; 3],
    pub ki: [f64; 3],
    pub kd: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorLimits {
    /// Position error integral bound [m·s].
    pub position: f64,
    /// Attitude error integral bound [rad·s].
    pub attitude: f64,
    /// Force integrator bound [N].
    pub force: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSet {
    /// Arm-tip position hold, per op axis. The normal-axis entry is unused.
    pub position: PidGains,
    pub attitude: PidGains,
    /// Normal-axis velocity loop.
    pub velocity: PdGains,
    /// Normal-axis force loop.
    pub force: PiGains,
    /// Velocity feedback during contact [N·s/m].
    pub contact_damping: f64,
    /// Impact dissipation gain `k_vf`.
    pub impact_kvf: f64,
    pub integrator_limits: IntegratorLimits,
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            position: PidGains {
                kp: [16.0, 0.0, 16.0],
                ki: [4.0, 0.0, 4.0],
                kd: [8.0, 0.0, 8.0],
            },
            attitude: PidGains {
                kp: [64.0; 3],
                ki: [0.0; 3],
                kd: [16.0; 3],
            },
            velocity: PdGains { kp: 4.0, kd: 0.0 },
            force: PiGains { kp: 3.0, ki: 20.0 },
            contact_damping: 20.0,
            impact_kvf: 0.4717,
            integrator_limits: IntegratorLimits {
                position: 0.5,
                attitude: 0.5,
                force: 4.0,
            },
        }
    }
}

impl GainSet {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let scalars = [
            self.velocity.kp,
            self.velocity.kd,
            self.force.kp,
            self.force.ki,
            self.contact_damping,
            self.impact_kvf,
        ];
        let all = self
            .position
            .kp
            .iter()
            .chain(&self.position.ki)
            .chain(&self.position.kd)
            .chain(&self.attitude.kp)
            .chain(&self.attitude.ki)
            .chain(&self.attitude.kd)
            .chain(&scalars);
        if let Some(g) = all.into_iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(ControllerError::InvalidGains(format!("gains must be finite and non-negative, got {g}")));
        }
        let l = self.integrator_limits;
        if !(l.position > 0.0 && l.attitude > 0.0 && l.force > 0.0) {
            return Err(ControllerError::InvalidGains("integrator limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Setpoints {
    /// Speed toward the surface during approach [m/s].
    pub approach_velocity: f64,
    pub force_setpoint: f64,
    pub contact_duration: f64,
    pub force_threshold_on: f64,
    pub impact_window: f64,
    /// Speed away from the surface during retreat; zero just holds still.
    pub retreat_velocity: f64,
    pub retreat_duration: f64,
    /// World x of the arm tip.
    pub hold_x: f64,
    /// World altitude of the arm tip.
    pub hold_altitude: f64,
    pub hold_yaw: f64,
}

impl Default for Setpoints {
    fn default() -> Self {
        Self {
            approach_velocity: 0.2,
            force_setpoint: 2.0,
            contact_duration: 6.0,
            force_threshold_on: 0.3,
            impact_window: 0.05,
            retreat_velocity: 0.1,
            retreat_duration: 1.0,
            hold_x: 0.0,
            hold_altitude: 0.34,
            hold_yaw: 0.0,
        }
    }
}

impl Setpoints {
    pub fn threshold_off(&self) -> f64 {
        THRESHOLD_OFF_RATIO * self.force_threshold_on
    }

    pub fn validate(&self, sensor_noise_sigma: f64) -> Result<(), ControllerError> {
        let bad = |msg: String| Err(ControllerError::InvalidSetpoints(msg));
        if !(self.approach_velocity > 0.0) {
            return bad(format!("approach velocity must be positive, got {}", self.approach_velocity));
        }
        if !(self.force_setpoint > 0.0) {
            return bad(format!("force setpoint must be positive, got {}", self.force_setpoint));
        }
        if !(self.force_threshold_on > 6.0 * sensor_noise_sigma) {
            return bad(format!(
                "force threshold {} N must exceed six sensor sigmas ({} N)",
                self.force_threshold_on,
                6.0 * sensor_noise_sigma
            ));
        }
        if !(self.impact_window > 0.0 && self.contact_duration > 0.0 && self.retreat_duration >= 0.0) {
            return bad("phase durations must be positive".into());
        }
        if !(self.retreat_velocity >= 0.0) {
            return bad("retreat velocity must be non-negative".into());
        }
        Ok(())
    }
}

/// `F = Ω̃·force + Ω·motion + bias`.
pub fn compose_command(motion: &Wrench, force: &Wrench, bias: &Wrench, omega: &Matrix6<f64>, omega_bar: &Matrix6<f64>) -> Wrench {
    omega_bar * force + omega * motion + bias
}

/// Constant normal force delivering the impulse `k_vf·Λ_nn·(v_f − v_i)`
/// over `window` seconds.
pub fn impact_command(v_i: f64, v_f: f64, lambda_nn: f64, kvf: f64, window: f64) -> f64 {
    kvf * lambda_nn * (v_f - v_i) / window
}

/// Force-channel integrator with anti-windup clamp.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForceIntegrator {
    pub value: f64,
}

/// Normal force: setpoint feed-forward, PI on the sensed error and damping
/// on the normal velocity.
pub fn contact_command(
    sensed_force: f64,
    normal_velocity: f64,
    setpoints: &Setpoints,
    gains: &GainSet,
    integrator: &mut ForceIntegrator,
    dt: f64,
) -> f64 {
    let err = setpoints.force_setpoint - sensed_force;
    let limit = gains.integrator_limits.force;
    integrator.value = (integrator.value + gains.force.ki * err * dt).clamp(-limit, limit);
    setpoints.force_setpoint + gains.force.kp * err + integrator.value - gains.contact_damping * normal_velocity
}

/// Measurements the phase machine looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseInputs {
    pub sensed_force: f64,
    /// Arm-tip velocity along the normal, positive toward the surface.
    pub normal_velocity: f64,
    pub time: f64,
}

pub fn update_phase(current: &PhaseState, inputs: &PhaseInputs, setpoints: &Setpoints) -> Result<PhaseState, ControllerError> {
    use ControllerPhase::*;
    let elapsed = inputs.time - current.entry_time;
    let next = match current.phase {
        Approach if inputs.sensed_force > setpoints.force_threshold_on => {
            let mut s = current.enter(Impact, inputs.time, inputs.sensed_force)?;
            s.v_i = Some(inputs.normal_velocity);
            s
        }
        Impact => {
            let v_i = current.v_i.unwrap_or(0.0);
            let dissipated = v_i <= 0.0 || inputs.normal_velocity < DISSIPATED_FRACTION * v_i;
            if dissipated || elapsed >= setpoints.impact_window - 1e-12 {
                current.enter(Contact, inputs.time, inputs.sensed_force)?
            } else {
                current.clone()
            }
        }
        Contact => {
            let lost = inputs.sensed_force < setpoints.threshold_off();
            if lost || elapsed >= setpoints.contact_duration - 1e-12 {
                current.enter(Retreat, inputs.time, inputs.sensed_force)?
            } else {
                current.clone()
            }
        }
        Retreat if elapsed >= setpoints.retreat_duration - 1e-12 => PhaseState {
            finished: true,
            ..current.clone()
        },
        _ => current.clone(),
    };
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransition {
    pub time: f64,
    pub from: ControllerPhase,
    pub to: ControllerPhase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// Wrench at the centre of mass in body axes, ready for allocation.
    pub body_wrench: Wrench,
    /// Composed wrench at the arm tip in body axes.
    pub op_wrench: Wrench,
    pub phase: ControllerPhase,
    pub transition: Option<PhaseTransition>,
}

/// Stateful controller stepped once per simulation tick.
#[derive(Debug, Clone)]
pub struct HybridController {
    pub gains: GainSet,
    pub setpoints: Setpoints,
    inert: InertialModel,
    lambda: Matrix6<f64>,
    free: (Matrix6<f64>, Matrix6<f64>),
    interaction: (Matrix6<f64>, Matrix6<f64>),
    state: PhaseState,
    position_integral: Vec3,
    attitude_integral: Vec3,
    force_integral: ForceIntegrator,
    previous_velocity_error: Option<f64>,
    transitions: Vec<PhaseTransition>,
}

impl HybridController {
    /// `task` names the force-controlled axes used during impact and contact.
    pub fn new(gains: GainSet, setpoints: Setpoints, task: &TaskSpec, inert: &InertialModel) -> Result<Self, ControllerError> {
        gains.validate()?;
        if !task.is_force_axis(NORMAL_AXIS) {
            return Err(ControllerError::TaskSpace(task_space::TaskSpaceError::InvalidSpec(
                "the arm axis must be force-controlled during contact".into(),
            )));
        }
        Ok(Self {
            gains,
            setpoints,
            inert: inert.clone(),
            lambda: dynamics::operational_inertia(inert)?,
            free: task_space::build_selection(&TaskSpec::free_flight())?,
            interaction: task_space::build_selection(task)?,
            state: PhaseState::initial(),
            position_integral: Vec3::zeros(),
            attitude_integral: Vec3::zeros(),
            force_integral: ForceIntegrator::default(),
            previous_velocity_error: None,
            transitions: Vec::new(),
        })
    }

    pub fn phase(&self) -> ControllerPhase {
        self.state.phase
    }

    pub fn phase_state(&self) -> &PhaseState {
        &self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.finished
    }

    pub fn transitions(&self) -> &[PhaseTransition] {
        &self.transitions
    }

    pub fn lambda(&self) -> &Matrix6<f64> {
        &self.lambda
    }

    /// Gravity and gyroscopic compensation expressed at the arm tip.
    pub fn bias_wrench(&self, state: &RigidBodyState) -> Wrench {
        let f_g = state.orientation.inverse_transform_vector(&(-self.inert.gravity * self.inert.mass));
        let ccg = dynamics::coriolis_centrifugal(state, &self.inert);
        let tau = ccg.fixed_rows::<3>(3).into_owned() - self.inert.com_to_op.cross(&f_g);
        Wrench::new(f_g.x, f_g.y, f_g.z, tau.x, tau.y, tau.z)
    }

    /// Arm-tip velocity along the arm axis, positive toward the surface.
    pub fn normal_velocity(&self, state: &RigidBodyState) -> f64 {
        task_space::op_twist(state, &self.inert.com_to_op)[NORMAL_AXIS]
    }

    /// PD on the normal velocity, scaled by `Λ_nn`.
    fn velocity_force(&mut self, v_set: f64, v_n: f64, dt: f64) -> f64 {
        let err = v_set - v_n;
        let derivative = self.previous_velocity_error.map_or(0.0, |prev| (err - prev) / dt);
        self.previous_velocity_error = Some(err);
        self.lambda[(NORMAL_AXIS, NORMAL_AXIS)] * (self.gains.velocity.kp * err + self.gains.velocity.kd * derivative)
    }

    /// Position and attitude hold as an op-frame acceleration; the normal
    /// entry is left at zero.
    fn hold_acceleration(&mut self, state: &RigidBodyState, dt: f64) -> Wrench {
        let sp = self.setpoints;
        let op = state.op_position(&self.inert);
        let target = Vec3::new(sp.hold_x, op.y, sp.hold_altitude);
        let err = state.orientation.inverse_transform_vector(&(target - op));
        let vel = task_space::op_twist(state, &self.inert.com_to_op);
        let v_op = vel.fixed_rows::<3>(0).into_owned();

        let lim = self.gains.integrator_limits;
        self.position_integral = (self.position_integral + err * dt).map(|v| v.clamp(-lim.position, lim.position));
        let p = self.gains.position;
        let mut lin = Vec3::zeros();
        for k in 0..3 {
            lin[k] = p.kp[k] * err[k] + p.ki[k] * self.position_integral[k] - p.kd[k] * v_op[k];
        }
        lin[NORMAL_AXIS] = 0.0;

        let desired = UnitQuaternion::from_euler_angles(0.0, 0.0, sp.hold_yaw);
        let att_err = (state.orientation.inverse() * desired).scaled_axis();
        self.attitude_integral = (self.attitude_integral + att_err * dt).map(|v| v.clamp(-lim.attitude, lim.attitude));
        let a = self.gains.attitude;
        let mut ang = Vec3::zeros();
        for k in 0..3 {
            ang[k] = a.kp[k] * att_err[k] + a.ki[k] * self.attitude_integral[k] - a.kd[k] * state.angular_velocity[k];
        }
        Wrench::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z)
    }

    /// Advances the phase machine on the current measurement, then builds the
    /// command for the resulting phase.
    pub fn step(&mut self, state: &RigidBodyState, sensed_force: f64, dt: f64) -> Result<ControlOutput, ControllerError> {
        let v_n = self.normal_velocity(state);
        let previous = self.state.phase;
        let inputs = PhaseInputs {
            sensed_force,
            normal_velocity: v_n,
            time: state.time,
        };
        self.state = update_phase(&self.state, &inputs, &self.setpoints)?;
        let transition = (self.state.phase != previous).then_some(PhaseTransition {
            time: state.time,
            from: previous,
            to: self.state.phase,
        });
        if let Some(t) = transition {
            self.transitions.push(t);
            if t.to == ControllerPhase::Contact {
                self.force_integral = ForceIntegrator::default();
            }
            if t.to == ControllerPhase::Retreat {
                self.previous_velocity_error = None;
            }
        }

        let sp = self.setpoints;
        let lambda_nn = self.lambda[(NORMAL_AXIS, NORMAL_AXIS)];
        let accel = self.hold_acceleration(state, dt);
        let mut motion = self.lambda * accel;
        let mut force = Wrench::zeros();
        let elapsed = state.time - self.state.entry_time;

        match self.state.phase {
            ControllerPhase::Approach => {
                motion[NORMAL_AXIS] += self.velocity_force(sp.approach_velocity, v_n, dt);
            }
            ControllerPhase::Impact => {
                let v_i = self.state.v_i.unwrap_or(0.0);
                force[NORMAL_AXIS] = impact_command(v_i, 0.0, lambda_nn, self.gains.impact_kvf, sp.impact_window);
            }
            ControllerPhase::Contact => {
                force[NORMAL_AXIS] = contact_command(sensed_force, v_n, &sp, &self.gains, &mut self.force_integral, dt);
            }
            ControllerPhase::Retreat => {
                motion[NORMAL_AXIS] += self.velocity_force(-sp.retreat_velocity, v_n, dt);
                // Pulse away from the wall, sized like an impact of the retreat speed.
                if elapsed < sp.impact_window {
                    motion[NORMAL_AXIS] += impact_command(sp.retreat_velocity, 0.0, lambda_nn, self.gains.impact_kvf, sp.impact_window);
                }
            }
        }

        let (omega, omega_bar) = if self.state.phase.uses_force_channel() {
            self.interaction
        } else {
            self.free
        };
        let op_wrench = compose_command(&motion, &force, &self.bias_wrench(state), &omega, &omega_bar);
        Ok(ControlOutput {
            body_wrench: task_space::op_to_com_wrench(&op_wrench, &self.inert.com_to_op),
            op_wrench,
            phase: self.state.phase,
            transition,
        })
    }
}
