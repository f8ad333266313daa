//! Parameter sweeps over a base scenario.

use rayon::prelude::*;
use serde::Serialize;

use super::scenario::{ExperimentMode, Scenario, SweepAxis};
use super::world::{run_scenario, RunOutcome};
use super::HarnessError;
use crate::inspection::{self, SurfaceEstimate};
use crate::Result;

/// One run of the grid.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub index: usize,
    pub seed: u64,
    pub overrides: Vec<(String, toml::Value)>,
    pub surface: String,
    pub trial_id: usize,
    pub outcome: std::result::Result<RunOutcome, String>,
    pub estimate: Option<SurfaceEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridFailure {
    pub index: usize,
    pub overrides: Vec<(String, String)>,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub points: Vec<GridPoint>,
    /// Estimates for inspection and ballistic runs, in grid order.
    pub estimates: Vec<SurfaceEstimate>,
    pub failures: Vec<GridFailure>,
}

impl CampaignOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Cartesian product of the sweep axes, first axis outermost.
pub fn expand_grid(axes: &[SweepAxis]) -> Vec<Vec<(String, toml::Value)>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut point = prefix.clone();
                    point.push((axis.key.clone(), v.clone()));
                    point
                })
            })
            .collect()
    })
}

fn run_point(base: &Scenario, overrides: &[(String, toml::Value)], seed: u64) -> Result<(Scenario, RunOutcome)> {
    let mut scenario = base.with_seed(seed)?;
    for (k, v) in overrides {
        scenario = scenario.with_override(k, v.clone())?;
    }
    let outcome = run_scenario(&scenario)?;
    Ok((scenario, outcome))
}

fn estimate_for(scenario: &Scenario, outcome: &RunOutcome, trial_id: usize) -> Result<Option<SurfaceEstimate>> {
    if scenario.config.sim.mode == ExperimentMode::Interaction {
        return Ok(None);
    }
    let episode = inspection::detect_episode(&outcome.log.episode_samples(), scenario.detector_config())?;
    let est = inspection::estimate_stiffness(
        &episode,
        scenario.config.inertial.mass,
        scenario.config.end_effector.tool_stiffness,
        &scenario.active_surface()?.label,
        trial_id,
    )?;
    Ok(Some(est))
}

/// Runs every grid point of `sweep` (or of the scenario's own sweep when
/// `sweep` is empty) in parallel. Point `i` uses seed `base + i`; results are
/// returned in grid order regardless of scheduling.
pub fn run_campaign(base: &Scenario, sweep: &[SweepAxis]) -> std::result::Result<CampaignOutcome, HarnessError> {
    let axes = if sweep.is_empty() { &base.config.campaign.sweep[..] } else { sweep };
    if axes.iter().any(|a| a.values.is_empty()) {
        return Err(HarnessError::EmptyGrid);
    }
    let grid = expand_grid(axes);
    let base_seed = base.config.sim.seed;

    let runs: Vec<_> = grid
        .par_iter()
        .enumerate()
        .map(|(index, overrides)| {
            let seed = base_seed.wrapping_add(index as u64);
            (index, seed, run_point(base, overrides, seed))
        })
        .collect();

    let mut per_surface: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut points = Vec::with_capacity(runs.len());
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for ((index, seed, result), overrides) in runs.into_iter().zip(grid) {
        let describe = |overrides: &[(String, toml::Value)]| overrides.iter().map(|(k, v)| (k.clone(), v.to_string())).collect();
        match result {
            Ok((scenario, outcome)) => {
                let surface = scenario.active_surface().map(|s| s.label.clone()).unwrap_or_default();
                let counter = per_surface.entry(surface.clone()).or_insert(0);
                *counter += 1;
                let trial_id = *counter;
                let estimate = match estimate_for(&scenario, &outcome, trial_id) {
                    Ok(e) => e,
                    Err(e) => {
                        failures.push(GridFailure {
                            index,
                            overrides: describe(&overrides),
                            error: e.to_string(),
                        });
                        None
                    }
                };
                estimates.extend(estimate.clone());
                points.push(GridPoint {
                    index,
                    seed,
                    overrides,
                    surface,
                    trial_id,
                    outcome: Ok(outcome),
                    estimate,
                });
            }
            Err(e) => {
                failures.push(GridFailure {
                    index,
                    overrides: describe(&overrides),
                    error: e.to_string(),
                });
                points.push(GridPoint {
                    index,
                    seed,
                    overrides,
                    surface: String::new(),
                    trial_id: 0,
                    outcome: Err(e.to_string()),
                    estimate: None,
                });
            }
        }
    }
    Ok(CampaignOutcome {
        points,
        estimates,
        failures,
    })
}
