//! Fixed-step simulation loop.

use nalgebra::UnitQuaternion;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::log::{LogHeader, LogRow, TrajectoryLog, SCHEMA_VERSION};
use super::scenario::{ExperimentMode, Scenario};
use crate::allocation::{self, MixingMatrix, RotorCommand, SpeedLimits};
use crate::contact::{ContactModel, ContactReport};
use crate::controller::{ControllerPhase, HybridController, PhaseTransition};
use crate::dynamics::{self, InertialModel, RigidBodyState};
use crate::inspection::{EpisodeDetector, EpisodeSample, ImpactEpisode};
use crate::task_space;
use crate::{Error, Result, Vec3, Wrench};

/// Who computes the rotor wrench.
#[derive(Debug, Clone)]
enum Pilot {
    Hybrid(Box<HybridController>),
    /// Gravity and gyroscopic compensation only.
    Coast,
}

/// Result of one scenario run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: TrajectoryLog,
    /// Controller finished its retreat, or a ballistic bounce completed.
    pub terminal: bool,
    pub transitions: Vec<PhaseTransition>,
    /// Episode seen by the in-flight detector, if its window closed during the run.
    pub live_episode: Option<ImpactEpisode>,
    /// Phase the controller was in when the live episode became available.
    pub live_episode_phase: Option<ControllerPhase>,
}

/// One simulated vehicle and its surroundings.
#[derive(Debug, Clone)]
pub struct World {
    inert: InertialModel,
    mixing: MixingMatrix,
    limits: SpeedLimits,
    contact: ContactModel,
    pilot: Pilot,
    disturbance: Wrench,
    state: RigidBodyState,
    rng: ChaCha8Rng,
    dt: f64,
    last_report: ContactReport,
    detector: EpisodeDetector,
    live_episode: Option<(ImpactEpisode, Option<ControllerPhase>)>,
}

/// Mass seen along `normal` (world axes) at the arm tip for the given attitude.
pub fn effective_mass(inert: &InertialModel, orientation: &UnitQuaternion<f64>, normal: &Vec3) -> Result<f64> {
    let lambda = dynamics::operational_inertia(inert)?;
    let inv = lambda.try_inverse().ok_or(dynamics::DynamicsError::SingularJacobian)?;
    let n = orientation.inverse_transform_vector(normal);
    let mobility = n.dot(&(inv.fixed_view::<3, 3>(0, 0) * n));
    Ok(1.0 / mobility)
}

impl World {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let c = &scenario.config;
        let inert = c.inertial.model();
        let mixing = allocation::build_mixing_matrix(&c.geometry.geometry());
        if !mixing.is_full_rank() {
            return Err(allocation::AllocationError::SingularMixing { rank: mixing.rank }.into());
        }

        let mut state = RigidBodyState::at_rest(Vec3::from(c.initial.position));
        state.orientation = UnitQuaternion::from_euler_angles(0.0, 0.0, c.initial.yaw);
        state.linear_velocity = Vec3::from(c.initial.velocity);

        // Only the selected surface is installed; the others are catalogue entries.
        let surface = scenario.active_surface()?.model();
        let m_eff = effective_mass(&inert, &state.orientation, &surface.normal)?;
        let contact = ContactModel::new(surface, c.end_effector.model(), m_eff)?;

        let pilot = match c.sim.mode {
            ExperimentMode::Interaction | ExperimentMode::Inspection => Pilot::Hybrid(Box::new(HybridController::new(
                c.gains,
                c.setpoints,
                &scenario.task_spec()?,
                &inert,
            )?)),
            ExperimentMode::Ballistic => Pilot::Coast,
        };

        let mut world = Self {
            inert,
            mixing,
            limits: c.geometry.limits(),
            contact,
            pilot,
            disturbance: Wrench::from_column_slice(&c.inertial.disturbance),
            state,
            rng: ChaCha8Rng::seed_from_u64(c.sim.seed),
            dt: c.sim.dt,
            last_report: ContactReport {
                in_contact: false,
                penetration: 0.0,
                normal_force: 0.0,
                sensed_force: 0.0,
                wrench_world: Wrench::zeros(),
            },
            detector: EpisodeDetector::new(scenario.detector_config()),
            live_episode: None,
        };
        world.last_report = world.sense();
        Ok(world)
    }

    pub fn state(&self) -> &RigidBodyState {
        &self.state
    }

    pub fn active_contact(&self) -> &ContactModel {
        &self.contact
    }

    pub fn phase(&self) -> Option<ControllerPhase> {
        match &self.pilot {
            Pilot::Hybrid(c) => Some(c.phase()),
            Pilot::Coast => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        match &self.pilot {
            Pilot::Hybrid(c) => c.is_finished(),
            Pilot::Coast => self.live_episode.is_some(),
        }
    }

    fn sense(&mut self) -> ContactReport {
        let op_p = self.state.op_position(&self.inert);
        let op_v = self.state.op_velocity(&self.inert);
        self.contact.evaluate(&op_p, &op_v, &self.state.orientation, &mut self.rng)
    }

    fn gravity_compensation(&self) -> Wrench {
        let f = self.state.orientation.inverse_transform_vector(&(-self.inert.gravity * self.inert.mass));
        let ccg = dynamics::coriolis_centrifugal(&self.state, &self.inert);
        Wrench::new(f.x, f.y, f.z, ccg[3], ccg[4], ccg[5])
    }

    /// Advances one tick and returns the log row for the new state.
    pub fn step(&mut self, tick: u64) -> Result<LogRow> {
        let time = self.state.time;
        let at = |e: Error| Error::AtTime {
            time,
            source: Box::new(e),
        };
        let sensed = self.last_report.sensed_force;
        let (desired, phase, op_command_normal) = match &mut self.pilot {
            Pilot::Hybrid(c) => {
                let out = c.step(&self.state, sensed, self.dt).map_err(|e| at(e.into()))?;
                (out.body_wrench, Some(out.phase), out.op_wrench[crate::controller::NORMAL_AXIS])
            }
            Pilot::Coast => (self.gravity_compensation(), None, 0.0),
        };

        let cmd: RotorCommand =
            allocation::speeds_from_wrench(&self.mixing, &desired, self.limits).map_err(|e| at(e.into()))?;
        let delivered = allocation::wrench_from_speeds(&self.mixing, &cmd);

        let lever = self.state.orientation * self.inert.com_to_op;
        let contact_at_com = task_space::shift_wrench(&self.last_report.wrench_world, &lever);
        let external = contact_at_com + self.disturbance;
        let mut next = dynamics::step(&self.state, &delivered, &external, &self.inert, self.dt).map_err(|e| at(e.into()))?;
        next.time = (tick + 1) as f64 * self.dt;
        self.state = next;

        let report = self.sense();
        let surface = &self.contact.surface;
        let op_p = self.state.op_position(&self.inert);
        let op_v = self.state.op_velocity(&self.inert);
        let normal_velocity = -op_v.dot(&surface.normal);
        let surface_distance = surface.distance(&op_p);

        let sample = EpisodeSample {
            time: self.state.time,
            normal_velocity,
            sensed_force: report.sensed_force,
            penetration: report.penetration,
        };
        if let Some(ep) = self.detector.push(&sample) {
            if self.live_episode.is_none() {
                self.live_episode = Some((ep, phase));
            }
        }

        let (roll, pitch, yaw) = self.state.euler();
        let row = LogRow {
            t: self.state.time,
            phase,
            position: self.state.position.into(),
            euler: [roll, pitch, yaw],
            velocity: self.state.linear_velocity.into(),
            angular_velocity: self.state.angular_velocity.into(),
            op_position: op_p.into(),
            normal_velocity,
            surface_distance,
            sensed_force: report.sensed_force,
            normal_force: report.normal_force,
            penetration: report.penetration,
            in_contact: report.in_contact,
            squared_speeds: cmd.squared_speeds.into(),
            saturated: cmd.saturated,
            command: delivered.into(),
            op_command_normal,
            contact_force: [report.wrench_world[0], report.wrench_world[1], report.wrench_world[2]],
        };
        self.last_report = report;
        Ok(row)
    }
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunOutcome> {
    let c = &scenario.config;
    let mut world = World::new(scenario)?;
    let mode = match c.sim.mode {
        ExperimentMode::Interaction => "interaction",
        ExperimentMode::Inspection => "inspection",
        ExperimentMode::Ballistic => "ballistic",
    };
    let mut log = TrajectoryLog::new(LogHeader {
        schema_version: SCHEMA_VERSION,
        scenario_hash: scenario.hash(),
        seed: c.sim.seed,
        version: env!("CARGO_PKG_VERSION").to_owned(),
        mode: mode.to_owned(),
        surface: world.active_contact().surface.label.clone(),
        dt: c.sim.dt,
    });

    let steps = (c.sim.max_time / c.sim.dt).round() as u64;
    for tick in 0..steps {
        log.rows.push(world.step(tick)?);
        if world.is_terminal() {
            break;
        }
    }

    let transitions = match &world.pilot {
        Pilot::Hybrid(ctrl) => ctrl.transitions().to_vec(),
        Pilot::Coast => Vec::new(),
    };
    Ok(RunOutcome {
        terminal: world.is_terminal(),
        log,
        transitions,
        live_episode: world.live_episode.map(|(ep, _)| ep),
        live_episode_phase: world.live_episode.and_then(|(_, p)| p),
    })
}
