//! Task specification and wrench/twist transforms for the rigid arm.
//!
//! A [`TaskSpec`] marks each translational and rotational axis as either
//! motion-controlled (`σ = 1`) or force-controlled (`σ = 0`). The selection
//! matrices built from it are complementary projectors: `Ω` keeps the motion
//! axes, `Ω̃ = I − Ω` keeps the force axes.
//!
//! Wrenches are `[f; τ]`, twists `[v; ω]`. Transforms follow the convention
//! that moving a wrench's reference point by `r` adds `r × f` to the torque.

use nalgebra::{Matrix3, Matrix6};

use crate::dynamics::RigidBodyState;
use crate::{Vec3, Wrench};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaskSpaceError {
    #[error("invalid task specification: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    /// `Σ_f` diagonal: 1 where translation is motion-controlled.
    pub sigma_f: [f64; 3],
    /// `Σ_τ` diagonal: 1 where rotation is motion-controlled.
    pub sigma_tau: [f64; 3],
    pub rotation_f: Matrix3<f64>,
    pub rotation_tau: Matrix3<f64>,
}

impl TaskSpec {
    /// Motion control on every axis.
    pub fn free_flight() -> Self {
        Self {
            sigma_f: [1.0; 3],
            sigma_tau: [1.0; 3],
            rotation_f: Matrix3::identity(),
            rotation_tau: Matrix3::identity(),
        }
    }

    /// Force control on the named op-frame translation axes (`"x"`, `"y"`,
    /// `"z"`), attitude always motion-controlled.
    pub fn with_force_axes<S: AsRef<str>>(axes: &[S]) -> Result<Self, TaskSpaceError> {
        let mut spec = Self::free_flight();
        for axis in axes {
            let k = match axis.as_ref() {
                "x" => 0,
                "y" => 1,
                "z" => 2,
                other => return Err(TaskSpaceError::InvalidSpec(format!("unknown axis `{other}`"))),
            };
            spec.sigma_f[k] = 0.0;
        }
        Ok(spec)
    }

    pub fn is_force_axis(&self, k: usize) -> bool {
        self.sigma_f[k] == 0.0
    }
}

fn check_rotation(r: &Matrix3<f64>, name: &str) -> Result<(), TaskSpaceError> {
    if (r.transpose() * r - Matrix3::identity()).norm() > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
        return Err(TaskSpaceError::InvalidSpec(format!("{name} is not a rotation")));
    }
    Ok(())
}

/// Returns `(Ω, Ω̃)`.
pub fn build_selection(spec: &TaskSpec) -> Result<(Matrix6<f64>, Matrix6<f64>), TaskSpaceError> {
    for &s in spec.sigma_f.iter().chain(spec.sigma_tau.iter()) {
        if s != 0.0 && s != 1.0 {
            return Err(TaskSpaceError::InvalidSpec(format!("selection entries must be 0 or 1, got {s}")));
        }
    }
    check_rotation(&spec.rotation_f, "force-frame rotation")?;
    check_rotation(&spec.rotation_tau, "torque-frame rotation")?;

    let project = |r: &Matrix3<f64>, sigma: &[f64; 3]| {
        r.transpose() * Matrix3::from_diagonal(&Vec3::from_column_slice(sigma)) * r
    };
    let complement = |s: &[f64; 3]| [1.0 - s[0], 1.0 - s[1], 1.0 - s[2]];

    let mut omega = Matrix6::zeros();
    let mut omega_bar = Matrix6::zeros();
    omega
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&project(&spec.rotation_f, &spec.sigma_f));
    omega
        .fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&project(&spec.rotation_tau, &spec.sigma_tau));
    omega_bar
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&project(&spec.rotation_f, &complement(&spec.sigma_f)));
    omega_bar
        .fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&project(&spec.rotation_tau, &complement(&spec.sigma_tau)));
    Ok((omega, omega_bar))
}

fn split(w: &Wrench) -> (Vec3, Vec3) {
    (w.fixed_rows::<3>(0).into_owned(), w.fixed_rows::<3>(3).into_owned())
}

fn join(a: Vec3, b: Vec3) -> Wrench {
    Wrench::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// Re-expresses a wrench about a point displaced by `-offset`: torque gains
/// `offset × f`.
pub fn shift_wrench(wrench: &Wrench, offset: &Vec3) -> Wrench {
    let (f, tau) = split(wrench);
    join(f, tau + offset.cross(&f))
}

/// Wrench at the arm tip to the equivalent wrench at the centre of mass,
/// both in body axes.
pub fn op_to_com_wrench(f_op: &Wrench, rho: &Vec3) -> Wrench {
    shift_wrench(f_op, rho)
}

/// World-axes wrench about the centre of mass to body axes about the same point.
pub fn world_to_com_wrench(f_w: &Wrench, state: &RigidBodyState) -> Wrench {
    let (f, tau) = split(f_w);
    let q = state.orientation;
    join(q.inverse_transform_vector(&f), q.inverse_transform_vector(&tau))
}

/// World-axes wrench about the centre of mass to body axes about the arm tip.
pub fn world_to_op_wrench(f_w: &Wrench, state: &RigidBodyState, rho: &Vec3) -> Wrench {
    shift_wrench(&world_to_com_wrench(f_w, state), &-rho)
}

/// World-axes CoM twist `[v; ω]` to the arm-tip twist in body axes.
pub fn world_to_op_twist(twist_w: &Wrench, state: &RigidBodyState, rho: &Vec3) -> Wrench {
    let (v, w) = split(twist_w);
    let q = state.orientation;
    let w_b = q.inverse_transform_vector(&w);
    join(q.inverse_transform_vector(&v) + w_b.cross(rho), w_b)
}

/// Arm-tip twist of the current state in body axes.
pub fn op_twist(state: &RigidBodyState, rho: &Vec3) -> Wrench {
    let v_b = state.body_linear_velocity();
    let w_b = state.angular_velocity;
    join(v_b + w_b.cross(rho), w_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, UnitQuaternion};
    use proptest::prelude::*;

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn wrench() -> impl Strategy<Value = Wrench> {
        proptest::collection::vec(-10.0..10.0f64, 6).prop_map(|v| Wrench::from_column_slice(&v))
    }

    fn rotation() -> impl Strategy<Value = Rotation3<f64>> {
        vec3().prop_map(|v| Rotation3::new(v * 3.0))
    }

    fn state() -> impl Strategy<Value = RigidBodyState> {
        (vec3(), rotation(), vec3(), vec3()).prop_map(|(p, r, v, w)| RigidBodyState {
            position: p,
            orientation: UnitQuaternion::from_rotation_matrix(&r),
            linear_velocity: v,
            angular_velocity: w,
            time: 0.0,
        })
    }

    fn task_spec() -> impl Strategy<Value = TaskSpec> {
        (
            proptest::array::uniform3(proptest::bool::ANY),
            proptest::array::uniform3(proptest::bool::ANY),
            rotation(),
            rotation(),
        )
            .prop_map(|(f, t, rf, rt)| TaskSpec {
                sigma_f: f.map(|b| b as u8 as f64),
                sigma_tau: t.map(|b| b as u8 as f64),
                rotation_f: *rf.matrix(),
                rotation_tau: *rt.matrix(),
            })
    }

    #[test]
    fn full_motion_spec() {
        let (omega, omega_bar) = build_selection(&TaskSpec::free_flight()).unwrap();
        assert_eq!(omega, Matrix6::identity());
        assert_eq!(omega_bar, Matrix6::zeros());
    }

    #[test]
    fn wall_normal_spec() {
        let spec = TaskSpec::with_force_axes(&["y"]).unwrap();
        assert_eq!(spec.sigma_f, [1.0, 0.0, 1.0]);
        let (omega, omega_bar) = build_selection(&spec).unwrap();
        assert_eq!(omega.diagonal(), Wrench::new(1.0, 0.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!(omega_bar.diagonal(), Wrench::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn non_binary_selection_rejected() {
        let mut spec = TaskSpec::free_flight();
        spec.sigma_f[0] = 0.5;
        assert!(build_selection(&spec).is_err());
        assert!(TaskSpec::with_force_axes(&["w"]).is_err());
        let mut spec = TaskSpec::free_flight();
        spec.rotation_f[(0, 0)] = 2.0;
        assert!(build_selection(&spec).is_err());
    }

    #[test]
    fn lever_arm_examples() {
        let rho = Vec3::new(0.0, 0.3, 0.0);
        let w = Wrench::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
        assert_eq!(op_to_com_wrench(&w, &Vec3::zeros()), w);
        let along = op_to_com_wrench(&Wrench::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0), &rho);
        assert_eq!(along.fixed_rows::<3>(3).into_owned(), Vec3::zeros());
        // (0, 0.3, 0) × (1, 0, 0) = (0.3·0 − 0·0, 0·1 − 0·0, 0·0 − 0.3·1)
        let across = op_to_com_wrench(&Wrench::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0), &rho);
        assert_relative_eq!(across[5], -0.3, epsilon = 1e-15);
        assert_eq!(across[3], 0.0);
        assert_eq!(across[4], 0.0);
    }

    #[test]
    fn identity_pose_passes_through() {
        let s = RigidBodyState::at_rest(Vec3::new(3.0, 2.0, 1.0));
        let w = Wrench::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
        assert_eq!(world_to_op_wrench(&w, &s, &Vec3::zeros()), w);
    }

    proptest! {
        #[test]
        fn selection_projector_algebra(spec in task_spec()) {
            let (omega, omega_bar) = build_selection(&spec).unwrap();
            let eye = Matrix6::identity();
            prop_assert!((omega + omega_bar - eye).abs().max() < 1e-12);
            prop_assert!((omega * omega_bar).abs().max() < 1e-12);
            prop_assert!((omega * omega - omega).abs().max() < 1e-12);
            prop_assert!((omega - omega.transpose()).abs().max() < 1e-12);
        }

        #[test]
        fn rotated_world_force(s in state(), f in vec3()) {
            let w = Wrench::new(f.x, f.y, f.z, 0.0, 0.0, 0.0);
            let out = world_to_op_wrench(&w, &s, &Vec3::zeros());
            let r = s.orientation.to_rotation_matrix();
            let expected = r.matrix().transpose() * f;
            for k in 0..3 {
                prop_assert!((out[k] - expected[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn world_op_com_paths_agree(s in state(), w in wrench(), rho in vec3()) {
            let via_op = op_to_com_wrench(&world_to_op_wrench(&w, &s, &rho), &rho);
            let direct = world_to_com_wrench(&w, &s);
            prop_assert!((via_op - direct).norm() < 1e-10);
        }

        #[test]
        fn transforms_preserve_power(s in state(), w in wrench(), t in wrench(), rho in vec3()) {
            let p_world = w.dot(&t);
            let p_op = world_to_op_wrench(&w, &s, &rho).dot(&world_to_op_twist(&t, &s, &rho));
            prop_assert!((p_world - p_op).abs() < 1e-10);
        }

        #[test]
        fn op_twist_matches_state_velocity(s in state(), rho in vec3()) {
            let tw = op_twist(&s, &rho);
            let world = s.orientation * tw.fixed_rows::<3>(0).into_owned();
            let expected = s.linear_velocity + s.orientation * s.angular_velocity.cross(&rho);
            prop_assert!((world - expected).norm() < 1e-12);
        }
    }
}
