//! Scenario files, the simulation loop, logs, campaigns and exports.

pub mod campaign;
pub mod export;
pub mod log;
pub mod scenario;
pub mod world;

use serde::Serialize;

pub use campaign::{run_campaign, CampaignOutcome};
pub use export::{export_plot_data, ExportSelection};
pub use log::TrajectoryLog;
pub use scenario::{ExperimentMode, Scenario};
pub use world::{run_scenario, RunOutcome, World};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown surface `{0}`")]
    UnknownSurface(String),
    #[error("unknown series `{0}`")]
    UnknownSeries(String),
    #[error("campaign grid is empty")]
    EmptyGrid,
    #[error("malformed log: {0}")]
    Log(String),
    #[error("i/o error: {0}")]
    Io(String),
}

macro_rules! config_from {
    ($($t:ty),*) => {$(
        impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Config(e.to_string())
            }
        }
    )*};
}

config_from!(
    crate::allocation::AllocationError,
    crate::dynamics::DynamicsError,
    crate::contact::ContactError,
    crate::controller::ControllerError,
    crate::task_space::TaskSpaceError
);

/// Summary written next to the outputs of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub mode: String,
    pub surface: String,
    pub terminal: bool,
    pub rows: usize,
    pub transitions: Vec<crate::controller::PhaseTransition>,
    pub saturated_steps: usize,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(outcome: &RunOutcome, outputs: Vec<String>) -> Self {
        let h = &outcome.log.header;
        Self {
            version: h.version.clone(),
            scenario_hash: h.scenario_hash.clone(),
            seed: h.seed,
            mode: h.mode.clone(),
            surface: h.surface.clone(),
            terminal: outcome.terminal,
            rows: outcome.log.rows.len(),
            transitions: outcome.transitions.clone(),
            saturated_steps: outcome.log.rows.iter().filter(|r| r.saturated).count(),
            outputs,
        }
    }
}

/// Measured rebound ratio of a ballistic run against each configured restitution.
pub fn calibrate_contact(base: &Scenario, restitutions: &[f64]) -> crate::Result<Vec<(f64, f64)>> {
    let label = base.active_surface()?.label.clone();
    let idx = base
        .config
        .surfaces
        .iter()
        .position(|s| s.label == label)
        .expect("active surface exists");
    restitutions
        .iter()
        .map(|&e| {
            let s = base
                .with_override("sim.mode", toml::Value::String("ballistic".into()))?
                .with_override(&format!("surfaces.{idx}.restitution"), toml::Value::Float(e))?;
            let outcome = run_scenario(&s)?;
            let ep = crate::inspection::detect_episode(&outcome.log.episode_samples(), s.detector_config())?;
            Ok((e, crate::inspection::estimate_restitution(&ep)?.value))
        })
        .collect()
}
