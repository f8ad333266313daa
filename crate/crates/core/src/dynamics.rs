//! Free-flyer rigid-body dynamics.
//!
//! Linear velocity lives in the world frame (z up), angular velocity in the
//! body frame. Orientation is a unit quaternion; Euler angles are only a view.

use nalgebra::{Matrix3, Matrix6, UnitQuaternion};

use crate::{Vec3, Wrench};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("non-finite state at t = {time:.4} s: {detail}")]
    NonFiniteState { time: f64, detail: String },
    #[error("invalid inertial model: {0}")]
    InvalidInertia(String),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("operational Jacobian is singular")]
    SingularJacobian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InertialModel {
    pub mass: f64,
    /// Principal moments `(I_x, I_y, I_z)` [kg·m²].
    pub inertia_diag: Vec3,
    /// Gravity acceleration in the world frame.
    pub gravity: Vec3,
    /// Body-frame offset `ρ` from the centre of mass to the arm tip.
    pub com_to_op: Vec3,
}

impl InertialModel {
    pub fn new(mass: f64, inertia_diag: Vec3, com_to_op: Vec3) -> Self {
        Self {
            mass,
            inertia_diag,
            gravity: Vec3::new(0.0, 0.0, -crate::STANDARD_GRAVITY),
            com_to_op,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(DynamicsError::InvalidInertia(format!("mass must be positive, got {}", self.mass)));
        }
        if self.inertia_diag.iter().any(|&i| !(i > 0.0 && i.is_finite())) {
            return Err(DynamicsError::InvalidInertia(format!(
                "inertia moments must be positive, got {:?}",
                self.inertia_diag.as_slice()
            )));
        }
        if !self.gravity.iter().chain(self.com_to_op.iter()).all(|v| v.is_finite()) {
            return Err(DynamicsError::InvalidInertia("gravity and arm offset must be finite".into()));
        }
        Ok(())
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity.norm()
    }

    /// Spatial inertia `A = diag(M, M, M, I_x, I_y, I_z)`.
    pub fn spatial_inertia(&self) -> Matrix6<f64> {
        let d = self.inertia_diag;
        Matrix6::from_diagonal(&Wrench::new(self.mass, self.mass, self.mass, d.x, d.y, d.z))
    }

    fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.inertia_diag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyState {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    /// World-frame velocity of the centre of mass.
    pub linear_velocity: Vec3,
    /// Body-frame angular velocity.
    pub angular_velocity: Vec3,
    pub time: f64,
}

impl RigidBodyState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            orientation: UnitQuaternion::identity(),
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            time: 0.0,
        }
    }

    /// `(roll, pitch, yaw)` in radians.
    pub fn euler(&self) -> (f64, f64, f64) {
        self.orientation.euler_angles()
    }

    /// Arm-tip position in the world frame.
    pub fn op_position(&self, inert: &InertialModel) -> Vec3 {
        self.position + self.orientation * inert.com_to_op
    }

    /// Arm-tip velocity in the world frame.
    pub fn op_velocity(&self, inert: &InertialModel) -> Vec3 {
        self.linear_velocity + self.orientation * self.angular_velocity.cross(&inert.com_to_op)
    }

    /// Velocity of the centre of mass expressed in body axes.
    pub fn body_linear_velocity(&self) -> Vec3 {
        self.orientation.inverse_transform_vector(&self.linear_velocity)
    }

    pub fn kinetic_energy(&self, inert: &InertialModel) -> f64 {
        let w = self.angular_velocity;
        0.5 * inert.mass * self.linear_velocity.norm_squared() + 0.5 * w.dot(&(inert.inertia_matrix() * w))
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.orientation.coords.iter().all(|v| v.is_finite())
            && self.linear_velocity.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
            && self.time.is_finite()
    }
}

/// Gyroscopic term `[0; ω × Jω]` in body axes.
pub fn coriolis_centrifugal(state: &RigidBodyState, inert: &InertialModel) -> Wrench {
    let w = state.angular_velocity;
    let torque = w.cross(&(inert.inertia_matrix() * w));
    Wrench::new(0.0, 0.0, 0.0, torque.x, torque.y, torque.z)
}

/// Semi-implicit Euler step.
///
/// `body_wrench` is the rotor wrench at the centre of mass in body axes;
/// `external_wrench` acts at the centre of mass in world axes.
pub fn step(
    state: &RigidBodyState,
    body_wrench: &Wrench,
    external_wrench: &Wrench,
    inert: &InertialModel,
    dt: f64,
) -> Result<RigidBodyState, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidTimeStep(dt));
    }
    let rot = state.orientation;
    let body_force = body_wrench.fixed_rows::<3>(0).into_owned();
    let body_torque = body_wrench.fixed_rows::<3>(3).into_owned();
    let ext_force = external_wrench.fixed_rows::<3>(0).into_owned();
    let ext_torque = external_wrench.fixed_rows::<3>(3).into_owned();

    let linear_acc = (rot * body_force + ext_force) / inert.mass + inert.gravity;
    let gyro = coriolis_centrifugal(state, inert).fixed_rows::<3>(3).into_owned();
    let torque = body_torque + rot.inverse_transform_vector(&ext_torque) - gyro;
    let angular_acc = torque.component_div(&inert.inertia_diag);

    let linear_velocity = state.linear_velocity + linear_acc * dt;
    let angular_velocity = state.angular_velocity + angular_acc * dt;
    let position = state.position + linear_velocity * dt;
    let delta = UnitQuaternion::from_scaled_axis(angular_velocity * dt);
    let orientation = UnitQuaternion::new_normalize((rot * delta).into_inner());

    let next = RigidBodyState {
        position,
        orientation,
        linear_velocity,
        angular_velocity,
        time: state.time + dt,
    };
    if !next.is_finite() || !body_wrench.iter().chain(external_wrench.iter()).all(|v| v.is_finite()) {
        return Err(DynamicsError::NonFiniteState {
            time: next.time,
            detail: format!(
                "position {:?}, velocity {:?}, body wrench {:?}",
                next.position.as_slice(),
                next.linear_velocity.as_slice(),
                body_wrench.as_slice()
            ),
        });
    }
    Ok(next)
}

/// Rigid-arm Jacobian mapping a body-axes CoM twist `[v; ω]` to the arm-tip
/// twist in the same axes.
pub fn op_jacobian(com_to_op: &Vec3) -> Matrix6<f64> {
    let mut j = Matrix6::identity();
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-com_to_op.cross_matrix()));
    j
}

/// Operational-space inertia `Λ = (J A⁻¹ Jᵀ)⁻¹` at the arm tip, in body axes.
/// For a rigid arm this does not depend on the configuration.
pub fn operational_inertia(inert: &InertialModel) -> Result<Matrix6<f64>, DynamicsError> {
    let j = op_jacobian(&inert.com_to_op);
    let a_inv = Matrix6::from_diagonal(&inert.spatial_inertia().diagonal().map(|v| 1.0 / v));
    let lambda = (j * a_inv * j.transpose())
        .try_inverse()
        .ok_or(DynamicsError::SingularJacobian)?;
    Ok(0.5 * (lambda + lambda.transpose()))
}

/// `Λ` with both blocks rotated into world axes.
pub fn operational_inertia_world(state: &RigidBodyState, inert: &InertialModel) -> Result<Matrix6<f64>, DynamicsError> {
    let r = *state.orientation.to_rotation_matrix().matrix();
    let mut big_r = Matrix6::zeros();
    big_r.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    big_r.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    Ok(big_r * operational_inertia(inert)? * big_r.transpose())
}
