//! # hexinspect
//!
//! Deterministic simulation and control of a fully-actuated hexrotor aerial
//! manipulator that touches surfaces with a rigid, body-fixed arm.
//!
//! The crate covers the whole interaction loop:
//!
//! - [`allocation`]: tilted-rotor mixing matrix, wrench allocation and the
//!   cant-angle sweep.
//! - [`dynamics`]: free-flyer rigid-body integration and the operational-space
//!   inertia at the arm tip.
//! - [`contact`]: unilateral spring-damper wall with restitution-calibrated
//!   damping and the 1-D tip force sensor.
//! - [`task_space`]: selection matrices and wrench transforms between the
//!   operational point, the centre of mass and the world.
//! - [`controller`]: the approach / impact / contact / retreat state machine.
//! - [`inspection`]: restitution and stiffness estimation from interaction
//!   logs, and surface hardness classification.
//! - [`harness`]: scenario files, the simulation loop, trajectory logs,
//!   campaigns and plot-data export.
//!
//! A narrative guide with runnable snippets lives in the `book/` directory at
//! the repository root; its code blocks are compiled as doc-tests of this
//! crate.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod contact;
pub mod controller;
pub mod dynamics;
pub mod harness;
pub mod inspection;
pub mod task_space;

use nalgebra::{Vector3, Vector6};

/// Spatial 6-vector, force on top of torque (or linear on top of angular
/// velocity for twists).
pub type Wrench = Vector6<f64>;

/// 3-vector shorthand.
pub type Vec3 = Vector3<f64>;

/// Standard gravity [m/s²].
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Errors surfaced by the simulation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Allocation(#[from] allocation::AllocationError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Contact(#[from] contact::ContactError),
    #[error(transparent)]
    TaskSpace(#[from] task_space::TaskSpaceError),
    #[error(transparent)]
    Controller(#[from] controller::ControllerError),
    #[error(transparent)]
    Inspection(#[from] inspection::InspectionError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
    #[error("at t = {time:.3} s: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

// The guide's code blocks are compiled and run with `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/allocation.md")]
    mod allocation {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/contact.md")]
    mod contact {}
    #[doc = include_str!("../../../book/src/task_space.md")]
    mod task_space {}
    #[doc = include_str!("../../../book/src/controller.md")]
    mod controller {}
    #[doc = include_str!("../../../book/src/inspection.md")]
    mod inspection {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
}
