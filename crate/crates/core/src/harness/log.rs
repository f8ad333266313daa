//! Trajectory logs: a `#`-prefixed header block followed by CSV rows.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::controller::ControllerPhase;
use crate::inspection::EpisodeSample;

pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 40] = [
    "t",
    "phase",
    "x",
    "y",
    "z",
    "roll",
    "pitch",
    "yaw",
    "vx",
    "vy",
    "vz",
    "wx",
    "wy",
    "wz",
    "op_x",
    "op_y",
    "op_z",
    "normal_velocity",
    "surface_distance",
    "sensed_force",
    "normal_force",
    "penetration",
    "in_contact",
    "w2_1",
    "w2_2",
    "w2_3",
    "w2_4",
    "w2_5",
    "w2_6",
    "saturated",
    "cmd_fx",
    "cmd_fy",
    "cmd_fz",
    "cmd_tx",
    "cmd_ty",
    "cmd_tz",
    "op_cmd_fy",
    "contact_fx",
    "contact_fy",
    "contact_fz",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub scenario_hash: String,
    pub seed: u64,
    pub version: String,
    pub mode: String,
    pub surface: String,
    pub dt: f64,
}

/// One record per simulation step, taken after the step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    /// `None` in ballistic runs.
    pub phase: Option<ControllerPhase>,
    pub position: [f64; 3],
    /// Roll, pitch, yaw.
    pub euler: [f64; 3],
    pub velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    pub op_position: [f64; 3],
    /// Arm-tip speed toward the active surface.
    pub normal_velocity: f64,
    pub surface_distance: f64,
    pub sensed_force: f64,
    pub normal_force: f64,
    pub penetration: f64,
    pub in_contact: bool,
    pub squared_speeds: [f64; 6],
    pub saturated: bool,
    /// Wrench delivered by the rotors at the centre of mass, body axes.
    pub command: [f64; 6],
    /// Commanded force along the arm axis at the tip.
    pub op_command_normal: f64,
    pub contact_force: [f64; 3],
}

impl LogRow {
    fn fields(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(COLUMNS.len());
        out.push(fmt(self.t));
        out.push(self.phase.map_or("none", ControllerPhase::name).to_owned());
        let vectors: [&[f64]; 5] = [&self.position, &self.euler, &self.velocity, &self.angular_velocity, &self.op_position];
        out.extend(vectors.iter().flat_map(|v| v.iter().map(|&x| fmt(x))));
        for x in [self.normal_velocity, self.surface_distance, self.sensed_force, self.normal_force, self.penetration] {
            out.push(fmt(x));
        }
        out.push((self.in_contact as u8).to_string());
        out.extend(self.squared_speeds.iter().map(|&x| fmt(x)));
        out.push((self.saturated as u8).to_string());
        out.extend(self.command.iter().map(|&x| fmt(x)));
        out.push(fmt(self.op_command_normal));
        out.extend(self.contact_force.iter().map(|&x| fmt(x)));
        out
    }

    fn parse(record: &csv::StringRecord) -> Result<Self, HarnessError> {
        if record.len() != COLUMNS.len() {
            return Err(HarnessError::Log(format!("row has {} fields, expected {}", record.len(), COLUMNS.len())));
        }
        let num = |i: usize| -> Result<f64, HarnessError> {
            record[i]
                .parse::<f64>()
                .map_err(|e| HarnessError::Log(format!("column `{}`: {e}", COLUMNS[i])))
        };
        let arr3 = |i: usize| -> Result<[f64; 3], HarnessError> { Ok([num(i)?, num(i + 1)?, num(i + 2)?]) };
        let flag = |i: usize| -> Result<bool, HarnessError> {
            match &record[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(HarnessError::Log(format!("column `{}`: bad flag `{other}`", COLUMNS[i]))),
            }
        };
        let phase = match &record[1] {
            "none" => None,
            name => Some(ControllerPhase::from_name(name).ok_or_else(|| HarnessError::Log(format!("unknown phase `{name}`")))?),
        };
        let mut squared_speeds = [0.0; 6];
        let mut command = [0.0; 6];
        for k in 0..6 {
            squared_speeds[k] = num(23 + k)?;
            command[k] = num(30 + k)?;
        }
        Ok(Self {
            t: num(0)?,
            phase,
            position: arr3(2)?,
            euler: arr3(5)?,
            velocity: arr3(8)?,
            angular_velocity: arr3(11)?,
            op_position: arr3(14)?,
            normal_velocity: num(17)?,
            surface_distance: num(18)?,
            sensed_force: num(19)?,
            normal_force: num(20)?,
            penetration: num(21)?,
            in_contact: flag(22)?,
            squared_speeds,
            saturated: flag(29)?,
            command,
            op_command_normal: num(36)?,
            contact_force: arr3(37)?,
        })
    }
}

/// Shortest round-trip decimal form, so logs are byte-stable and lossless.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn new(header: LogHeader) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn column_index(name: &str) -> Option<usize> {
        COLUMNS.iter().position(|c| *c == name)
    }

    /// Values of one named column, as numbers (`phase` is not numeric).
    pub fn series(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        let idx = Self::column_index(name)
            .filter(|&i| i != 1)
            .ok_or_else(|| HarnessError::UnknownSeries(name.to_owned()))?;
        Ok(self
            .rows
            .iter()
            .map(|r| r.fields()[idx].parse::<f64>().expect("logged fields are numeric"))
            .collect())
    }

    pub fn episode_samples(&self) -> Vec<EpisodeSample> {
        self.rows
            .iter()
            .map(|r| EpisodeSample {
                time: r.t,
                normal_velocity: r.normal_velocity,
                sensed_force: r.sensed_force,
                penetration: r.penetration,
            })
            .collect()
    }

    /// Distinct phases in order of appearance, ignoring repeats of the same phase.
    pub fn phase_sequence(&self) -> Vec<ControllerPhase> {
        let mut seq: Vec<ControllerPhase> = Vec::new();
        for p in self.rows.iter().filter_map(|r| r.phase) {
            if seq.last() != Some(&p) {
                seq.push(p);
            }
        }
        seq
    }

    /// Times at which the phase changed, with the phase entered.
    pub fn phase_changes(&self) -> Vec<(f64, ControllerPhase, ControllerPhase)> {
        self.rows
            .windows(2)
            .filter_map(|w| match (w[0].phase, w[1].phase) {
                (Some(a), Some(b)) if a != b => Some((w[1].t, a, b)),
                _ => None,
            })
            .collect()
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), HarnessError> {
        let h = &self.header;
        let io = |e: std::io::Error| HarnessError::Io(e.to_string());
        writeln!(out, "# schema_version: {}", h.schema_version).map_err(io)?;
        writeln!(out, "# scenario_hash: {}", h.scenario_hash).map_err(io)?;
        writeln!(out, "# seed: {}", h.seed).map_err(io)?;
        writeln!(out, "# version: {}", h.version).map_err(io)?;
        writeln!(out, "# mode: {}", h.mode).map_err(io)?;
        writeln!(out, "# surface: {}", h.surface).map_err(io)?;
        writeln!(out, "# dt: {:?}", h.dt).map_err(io)?;
        writeln!(out, "# columns: {}", COLUMNS.len()).map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COLUMNS).map_err(|e| HarnessError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r.fields()).map_err(|e| HarnessError::Io(e.to_string()))?;
        }
        w.flush().map_err(io)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn read<R: BufRead>(mut input: R) -> Result<Self, HarnessError> {
        let mut header = LogHeader {
            schema_version: 0,
            scenario_hash: String::new(),
            seed: 0,
            version: String::new(),
            mode: String::new(),
            surface: String::new(),
            dt: 0.0,
        };
        let bad = |what: &str| HarnessError::Log(format!("bad header field `{what}`"));
        let mut line = String::new();
        let mut body = String::new();
        loop {
            line.clear();
            if input.read_line(&mut line).map_err(|e| HarnessError::Io(e.to_string()))? == 0 {
                break;
            }
            let Some(meta) = line.strip_prefix("# ") else {
                body.push_str(&line);
                break;
            };
            let (key, value) = meta.trim_end().split_once(": ").ok_or_else(|| bad(meta.trim_end()))?;
            match key {
                "schema_version" => header.schema_version = value.parse().map_err(|_| bad(key))?,
                "scenario_hash" => header.scenario_hash = value.to_owned(),
                "seed" => header.seed = value.parse().map_err(|_| bad(key))?,
                "version" => header.version = value.to_owned(),
                "mode" => header.mode = value.to_owned(),
                "surface" => header.surface = value.to_owned(),
                "dt" => header.dt = value.parse().map_err(|_| bad(key))?,
                "columns" => {}
                _ => return Err(bad(key)),
            }
        }
        if header.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Log(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        input.read_to_string(&mut body).map_err(|e| HarnessError::Io(e.to_string()))?;
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let names = reader.headers().map_err(|e| HarnessError::Log(e.to_string()))?;
        if names.iter().ne(COLUMNS.iter().copied()) {
            return Err(HarnessError::Log("column header does not match the schema".into()));
        }
        let rows = reader
            .records()
            .map(|r| LogRow::parse(&r.map_err(|e| HarnessError::Log(e.to_string()))?))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { header, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, phase: Option<ControllerPhase>) -> LogRow {
        LogRow {
            t,
            phase,
            position: [0.1, 0.2, 0.3],
            euler: [0.0, -0.0, 1e-17],
            velocity: [0.0, 0.2, 0.0],
            angular_velocity: [0.0; 3],
            op_position: [0.1, 0.55, 0.3],
            normal_velocity: 0.2,
            surface_distance: 0.45,
            sensed_force: -0.003,
            normal_force: 0.0,
            penetration: 0.0,
            in_contact: false,
            squared_speeds: [4.6e5; 6],
            saturated: false,
            command: [0.0, 2.0, 26.0, 0.0, 0.0, 0.0],
            op_command_normal: 2.0,
            contact_force: [0.0; 3],
        }
    }

    fn log() -> TrajectoryLog {
        let mut log = TrajectoryLog::new(LogHeader {
            schema_version: SCHEMA_VERSION,
            scenario_hash: "ab".repeat(32),
            seed: 7,
            version: "0.1.0".into(),
            mode: "interaction".into(),
            surface: "S1".into(),
            dt: 0.001,
        });
        log.rows.push(row(0.001, Some(ControllerPhase::Approach)));
        log.rows.push(row(0.002, Some(ControllerPhase::Impact)));
        log.rows.push(row(0.003, Some(ControllerPhase::Impact)));
        log
    }

    #[test]
    fn schema_has_no_duplicates() {
        let mut names = COLUMNS.to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), COLUMNS.len());
        assert_eq!(row(0.0, None).fields().len(), COLUMNS.len());
    }

    #[test]
    fn round_trip() {
        let original = log();
        let bytes = original.to_bytes();
        let parsed = TrajectoryLog::read(bytes.as_slice()).unwrap();
        assert_eq!(parsed, original);
        assert_eq!(parsed.to_bytes(), bytes);
    }

    #[test]
    fn inspection_columns_exist() {
        for name in ["t", "normal_velocity", "sensed_force", "penetration"] {
            assert!(TrajectoryLog::column_index(name).is_some(), "{name}");
        }
    }

    #[test]
    fn phases_and_series() {
        let l = log();
        assert_eq!(l.phase_sequence(), vec![ControllerPhase::Approach, ControllerPhase::Impact]);
        assert_eq!(l.phase_changes(), vec![(0.002, ControllerPhase::Approach, ControllerPhase::Impact)]);
        assert_eq!(l.series("op_y").unwrap(), vec![0.55; 3]);
        assert!(matches!(l.series("nope"), Err(HarnessError::UnknownSeries(_))));
        assert!(l.series("phase").is_err());
    }

    #[test]
    fn wrong_schema_rejected() {
        let text = String::from_utf8(log().to_bytes()).unwrap().replace("schema_version: 1", "schema_version: 9");
        assert!(TrajectoryLog::read(text.as_bytes()).is_err());
    }
}
