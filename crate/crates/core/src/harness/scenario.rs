//! TOML scenario files.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::allocation::{ActuatorGeometry, SpeedLimits};
use crate::contact::{EndEffectorModel, SurfaceModel};
use crate::controller::{GainSet, Setpoints};
use crate::dynamics::InertialModel;
use crate::inspection::DetectorConfig;
use crate::task_space::TaskSpec;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Full approach / impact / contact / retreat task.
    Interaction,
    /// Same controller tuned to let the tool bounce, for surface estimates.
    Inspection,
    /// Gravity compensation only; the vehicle coasts into the wall.
    Ballistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mode: ExperimentMode,
    pub dt: f64,
    pub max_time: f64,
    pub seed: u64,
    /// Label of the active surface; may be omitted when only one is defined.
    #[serde(default)]
    pub surface: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub cant_angle_deg: f64,
    pub arm_radius: f64,
    pub thrust_constant: f64,
    pub torque_constant: f64,
    pub max_rotor_speed: f64,
}

impl GeometryConfig {
    pub fn geometry(&self) -> ActuatorGeometry {
        ActuatorGeometry::hexrotor(
            self.arm_radius,
            self.cant_angle_deg.to_radians(),
            self.thrust_constant,
            self.torque_constant,
        )
    }

    pub fn limits(&self) -> SpeedLimits {
        SpeedLimits::from_max_speed(self.max_rotor_speed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertialConfig {
    pub mass: f64,
    pub inertia: [f64; 3],
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    pub com_to_op: [f64; 3],
    /// Constant world-frame wrench on the centre of mass.
    #[serde(default)]
    pub disturbance: [f64; 6],
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -crate::STANDARD_GRAVITY]
}

impl InertialConfig {
    pub fn model(&self) -> InertialModel {
        InertialModel {
            mass: self.mass,
            inertia_diag: Vec3::from(self.inertia),
            gravity: Vec3::from(self.gravity),
            com_to_op: Vec3::from(self.com_to_op),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub label: String,
    pub plane_point: [f64; 3],
    pub normal: [f64; 3],
    pub stiffness: f64,
    pub restitution: f64,
    #[serde(default)]
    pub friction: f64,
}

impl SurfaceConfig {
    pub fn model(&self) -> SurfaceModel {
        SurfaceModel {
            plane_point: Vec3::from(self.plane_point),
            normal: Vec3::from(self.normal),
            stiffness: self.stiffness,
            restitution: self.restitution,
            friction: self.friction,
            label: self.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndEffectorConfig {
    pub tool_stiffness: f64,
    pub sensor_noise_sigma: f64,
    #[serde(default = "default_sensor_axis")]
    pub sensor_axis: [f64; 3],
}

fn default_sensor_axis() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

impl EndEffectorConfig {
    pub fn model(&self) -> EndEffectorModel {
        EndEffectorModel {
            tool_stiffness: self.tool_stiffness,
            sensor_noise_sigma: self.sensor_noise_sigma,
            sensor_axis: Vec3::from(self.sensor_axis),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// Op-frame translation axes under force control during contact.
    pub force_axes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub position: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the scenario, e.g. `setpoints.approach_velocity`.
    pub key: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sim: SimConfig,
    pub geometry: GeometryConfig,
    pub inertial: InertialConfig,
    pub surfaces: Vec<SurfaceConfig>,
    pub end_effector: EndEffectorConfig,
    pub task: TaskConfig,
    #[serde(default)]
    pub gains: GainSet,
    #[serde(default)]
    pub setpoints: Setpoints,
    pub initial: InitialConfig,
    #[serde(default)]
    pub detector: Option<DetectorConfig>,
    #[serde(default)]
    pub campaign: CampaignConfig,
}

/// A parsed, validated scenario together with the TOML it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    raw: toml::Table,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        Self::from_table(raw)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// One of the scenarios shipped with the crate.
    pub fn builtin(name: &str) -> Result<Self, HarnessError> {
        let text = match name {
            "interaction_s1" => include_str!("../../scenarios/interaction_s1.toml"),
            "interaction_s2" => include_str!("../../scenarios/interaction_s2.toml"),
            "inspection_table1" => include_str!("../../scenarios/inspection_table1.toml"),
            "ballistic_calibration" => include_str!("../../scenarios/ballistic_calibration.toml"),
            other => return Err(HarnessError::Config(format!("no built-in scenario `{other}`"))),
        };
        Self::from_toml_str(text)
    }

    pub const BUILTIN: [&'static str; 4] = ["interaction_s1", "interaction_s2", "inspection_table1", "ballistic_calibration"];

    fn from_table(raw: toml::Table) -> Result<Self, HarnessError> {
        let config: ScenarioConfig = toml::Value::Table(raw.clone())
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let s = Self { config, raw };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let c = &self.config;
        if !(c.sim.dt > 0.0 && c.sim.dt.is_finite()) {
            return Err(HarnessError::Config(format!("sim.dt must be positive, got {}", c.sim.dt)));
        }
        if !(c.sim.max_time >= 0.0 && c.sim.max_time.is_finite()) {
            return Err(HarnessError::Config(format!("sim.max_time must be non-negative, got {}", c.sim.max_time)));
        }
        if !(c.geometry.max_rotor_speed > 0.0) {
            return Err(HarnessError::Config("geometry.max_rotor_speed must be positive".into()));
        }
        c.geometry.geometry().validate()?;
        c.inertial.model().validate()?;
        c.end_effector.model().validate()?;
        if c.surfaces.is_empty() {
            return Err(HarnessError::Config("at least one [[surfaces]] entry is required".into()));
        }
        for s in &c.surfaces {
            s.model().validate()?;
        }
        self.active_surface()?;
        c.gains.validate()?;
        c.setpoints.validate(c.end_effector.sensor_noise_sigma)?;
        self.task_spec()?;
        Ok(())
    }

    pub fn active_surface(&self) -> Result<&SurfaceConfig, HarnessError> {
        let surfaces = &self.config.surfaces;
        match &self.config.sim.surface {
            Some(label) => surfaces
                .iter()
                .find(|s| &s.label == label)
                .ok_or_else(|| HarnessError::UnknownSurface(label.clone())),
            None if surfaces.len() == 1 => Ok(&surfaces[0]),
            None => Err(HarnessError::Config("several surfaces defined; set sim.surface".into())),
        }
    }

    pub fn task_spec(&self) -> Result<TaskSpec, HarnessError> {
        Ok(TaskSpec::with_force_axes(&self.config.task.force_axes)?)
    }

    pub fn detector_config(&self) -> DetectorConfig {
        self.config.detector.unwrap_or(DetectorConfig {
            threshold_on: self.config.setpoints.force_threshold_on,
            threshold_off: self.config.setpoints.threshold_off(),
            ..DetectorConfig::default()
        })
    }

    /// Canonical TOML text; the scenario hash is taken over these bytes.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(&self.raw).expect("a parsed table always serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }

    /// Returns a copy with `key` (dotted path) replaced by `value`.
    pub fn with_override(&self, key: &str, value: toml::Value) -> Result<Self, HarnessError> {
        let mut raw = self.raw.clone();
        set_dotted(&mut raw, key, value)?;
        Self::from_table(raw)
    }

    pub fn with_seed(&self, seed: u64) -> Result<Self, HarnessError> {
        let seed = i64::try_from(seed).map_err(|_| HarnessError::Config(format!("seed {seed} does not fit in TOML")))?;
        self.with_override("sim.seed", toml::Value::Integer(seed))
    }
}

/// Sets `key` inside `table`. Numeric segments index into arrays, so
/// `surfaces.0.restitution` reaches the first surface.
fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), HarnessError> {
    let bad = |why: String| HarnessError::Config(format!("`{key}`: {why}"));
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut cursor = table
        .entry(path.first().copied().unwrap_or(last).to_owned())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    if path.is_empty() {
        *cursor = value;
        return Ok(());
    }
    for part in path[1..].iter().chain(std::iter::once(last)) {
        cursor = match cursor {
            toml::Value::Table(t) => t
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => {
                let i: usize = part.parse().map_err(|_| bad(format!("`{part}` is not an array index")))?;
                let len = a.len();
                a.get_mut(i).ok_or_else(|| bad(format!("index {i} out of range ({len} entries)")))?
            }
            _ => return Err(bad(format!("cannot descend into `{part}`"))),
        };
    }
    *cursor = value;
    Ok(())
}

/// Parses a CLI value: TOML syntax when it parses (numbers, booleans,
/// arrays, quoted strings), a bare string otherwise.
pub fn parse_value(text: &str) -> toml::Value {
    let text = text.trim();
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_owned()))
}

/// Parses `key=v1,v2,...` into a sweep axis.
pub fn parse_sweep(arg: &str) -> Result<SweepAxis, HarnessError> {
    let (key, values) = arg
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("sweep `{arg}` is not key=v1,v2,...")))?;
    let values: Vec<toml::Value> = values.split(',').filter(|v| !v.trim().is_empty()).map(parse_value).collect();
    if key.trim().is_empty() || values.is_empty() {
        return Err(HarnessError::Config(format!("sweep `{arg}` needs a key and at least one value")));
    }
    Ok(SweepAxis {
        key: key.trim().to_owned(),
        values,
    })
}
