//! Plot-ready series files.

use std::path::{Path, PathBuf};

use super::log::TrajectoryLog;
use super::HarnessError;

/// One output file: a time column plus one logged column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesSpec {
    pub file: String,
    pub column: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportSelection {
    pub series: Vec<SeriesSpec>,
    /// Also write the phase-change times.
    pub phases: bool,
}

fn spec(file: &str, column: &str) -> SeriesSpec {
    SeriesSpec {
        file: file.into(),
        column: column.into(),
    }
}

impl ExportSelection {
    /// `fig7`: distance to the wall, normal velocity and force with phase
    /// markers. `fig8`: lateral position and altitude. `fig9`: velocity and
    /// force of an inspection bounce.
    pub fn preset(name: &str) -> Result<Self, HarnessError> {
        let s = match name {
            "fig7" => Self {
                series: vec![
                    spec("position", "surface_distance"),
                    spec("velocity", "normal_velocity"),
                    spec("force", "sensed_force"),
                ],
                phases: true,
            },
            "fig8" => Self {
                series: vec![spec("x_position", "op_x"), spec("altitude", "z")],
                phases: false,
            },
            "fig9" => Self {
                series: vec![spec("velocity", "normal_velocity"), spec("force", "sensed_force")],
                phases: true,
            },
            other => return Err(HarnessError::UnknownSeries(format!("preset `{other}`"))),
        };
        Ok(s)
    }

    /// Ad-hoc selection of logged columns, one file per column.
    pub fn columns<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            series: names.iter().map(|n| spec(n.as_ref(), n.as_ref())).collect(),
            phases: false,
        }
    }
}

/// Writes `<stem>_<file>.csv` per series and `<stem>_phases.csv` when asked.
/// Every column is checked before any file is written.
pub fn export_plot_data(log: &TrajectoryLog, selection: &ExportSelection, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, HarnessError> {
    let data = selection
        .series
        .iter()
        .map(|s| log.series(&s.column).map(|v| (s, v)))
        .collect::<Result<Vec<_>, _>>()?;
    if data.is_empty() && !selection.phases {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;

    let csv_err = |e: csv::Error| HarnessError::Io(e.to_string());
    let mut written = Vec::new();
    for (s, values) in data {
        let path = dir.join(format!("{stem}_{}.csv", s.file));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(["t", s.column.as_str()]).map_err(csv_err)?;
        for (row, v) in log.rows.iter().zip(values) {
            w.write_record([format!("{:?}", row.t), format!("{v:?}")]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
        written.push(path);
    }
    if selection.phases {
        let path = dir.join(format!("{stem}_phases.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(["t", "from", "to"]).map_err(csv_err)?;
        for (t, from, to) in log.phase_changes() {
            w.write_record([format!("{t:?}"), from.name().into(), to.name().into()]).map_err(csv_err)?;
        }
        w.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
        written.push(path);
    }
    Ok(written)
}
