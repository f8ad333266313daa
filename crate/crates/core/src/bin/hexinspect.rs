//! Command-line front end: runs scenarios and campaigns and exports plot data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use hexinspect::harness::{
    self, campaign, export_plot_data, scenario, ExportSelection, RunManifest, Scenario, TrajectoryLog,
};
use hexinspect::inspection;

#[derive(Parser)]
#[command(name = "hexinspect", version, about = "Hexrotor contact-inspection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its log.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write plot data for a figure preset.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Run a parameter grid and write logs plus the estimates table.
    Campaign {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// `key=v1,v2,...`; repeat for more axes. Defaults to the scenario's own sweep.
        #[arg(long)]
        sweep: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Turn a saved log into plot-ready series files.
    Export {
        /// Log written by `run` or `campaign`.
        log: PathBuf,
        #[arg(long, required_unless_present = "columns")]
        preset: Option<String>,
        /// Comma-separated column names, as an alternative to a preset.
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Parse and check a scenario, then print its hash.
    ValidateConfig {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Coast into the active wall for several restitutions and report the rebound ratio.
    CalibrateContact {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.7, 0.9])]
        restitution: Vec<f64>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value` override, e.g. `gains.impact_kvf=0.05`.
    #[arg(long = "set")]
    overrides: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> anyhow::Result<Scenario> {
        let path = Path::new(&self.scenario);
        let mut s = if path.exists() {
            Scenario::from_path(path)?
        } else if Scenario::BUILTIN.contains(&self.scenario.as_str()) {
            Scenario::builtin(&self.scenario)?
        } else {
            bail!("`{}` is neither a file nor a built-in scenario ({})", self.scenario, Scenario::BUILTIN.join(", "));
        };
        for o in &self.overrides {
            let (k, v) = o.split_once('=').with_context(|| format!("override `{o}` is not key=value"))?;
            s = s.with_override(k.trim(), scenario::parse_value(v))?;
        }
        if let Some(seed) = self.seed {
            s = s.with_seed(seed)?;
        }
        Ok(s)
    }

    fn stem(&self) -> String {
        Path::new(&self.scenario)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    }
}

fn write_log(log: &TrajectoryLog, path: &Path) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| path.display().to_string())?;
    log.write(std::io::BufWriter::new(file))?;
    Ok(())
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| path.display().to_string())
}

fn run(args: &ScenarioArgs, out: &Path, preset: Option<&str>) -> anyhow::Result<bool> {
    let s = args.load()?;
    let stem = args.stem();
    let outcome = harness::run_scenario(&s)?;
    std::fs::create_dir_all(out)?;

    let log_path = out.join(format!("{stem}.log"));
    write_log(&outcome.log, &log_path)?;
    let mut outputs = vec![log_path];
    if let Some(p) = preset {
        outputs.extend(export_plot_data(&outcome.log, &ExportSelection::preset(p)?, out, &stem)?);
    }
    let names = outputs.iter().map(|p| p.display().to_string()).collect();
    let manifest = RunManifest::new(&outcome, names);
    write_json(&manifest, &out.join(format!("{stem}_manifest.json")))?;

    for t in &outcome.transitions {
        println!("{:8.3} s  {} -> {}", t.time, t.from.name(), t.to.name());
    }
    if let Some(ep) = &outcome.live_episode {
        let e = inspection::estimate_restitution(ep)?;
        println!(
            "episode: v_i {:.4} m/s, v_f {:.4} m/s, e {:.3}, contact {:.1} ms",
            ep.approach_velocity,
            ep.rebound_velocity,
            e.value,
            ep.contact_duration * 1e3
        );
    }
    println!(
        "{} rows, {} saturated, terminal: {}",
        manifest.rows, manifest.saturated_steps, manifest.terminal
    );
    Ok(outcome.terminal)
}

fn run_campaign(args: &ScenarioArgs, sweep: &[String], out: &Path) -> anyhow::Result<bool> {
    let s = args.load()?;
    let stem = args.stem();
    let axes = sweep.iter().map(|a| scenario::parse_sweep(a)).collect::<Result<Vec<_>, _>>()?;
    let result = campaign::run_campaign(&s, &axes)?;
    std::fs::create_dir_all(out)?;

    let mut all_terminal = true;
    for p in &result.points {
        if let Ok(o) = &p.outcome {
            write_log(&o.log, &out.join(format!("{stem}_{:03}.log", p.index)))?;
            all_terminal &= o.terminal;
        }
    }
    for f in &result.failures {
        eprintln!("point {} {:?}: {}", f.index, f.overrides, f.error);
    }

    if !result.estimates.is_empty() {
        let table = out.join(format!("{stem}_estimates.csv"));
        inspection::write_estimates_table(std::fs::File::create(&table)?, &result.estimates)?;
        inspection::write_estimates_table(std::io::stdout().lock(), &result.estimates)?;
        match inspection::classify_surfaces(&result.estimates) {
            Ok(report) => {
                for c in &report.comparisons {
                    match &c.verdict {
                        inspection::Verdict::Higher { higher, lower } => println!("{:?}: {higher} > {lower}", c.metric),
                        inspection::Verdict::Indistinguishable => println!("{:?}: {} ~ {}", c.metric, c.a, c.b),
                    }
                }
                write_json(&report, &out.join(format!("{stem}_classification.json")))?;
            }
            Err(e) => eprintln!("classification skipped: {e}"),
        }
    }
    write_json(&result.failures, &out.join(format!("{stem}_failures.json")))?;
    println!("{} points, {} failures", result.points.len(), result.failures.len());
    Ok(result.is_complete() && all_terminal)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, out, preset } => run(scenario, out, preset.as_deref()),
        Command::Campaign { scenario, sweep, out } => run_campaign(scenario, sweep, out),
        Command::Export {
            log,
            preset,
            columns,
            out,
        } => (|| {
            let file = std::fs::File::open(log).with_context(|| log.display().to_string())?;
            let log_data = TrajectoryLog::read(std::io::BufReader::new(file))?;
            let selection = match preset {
                Some(p) => ExportSelection::preset(p)?,
                None => ExportSelection::columns(columns),
            };
            let stem = log.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "log".into());
            for p in export_plot_data(&log_data, &selection, out, &stem)? {
                println!("{}", p.display());
            }
            Ok(true)
        })(),
        Command::ValidateConfig { scenario } => scenario.load().map(|s| {
            println!("ok {}", s.hash());
            true
        }),
        Command::CalibrateContact { scenario, restitution } => (|| {
            let s = scenario.load()?;
            println!("configured,measured,error");
            let mut ok = true;
            for (e, measured) in harness::calibrate_contact(&s, restitution)? {
                println!("{e},{measured:.4},{:+.4}", measured - e);
                ok &= (measured - e).abs() <= 0.03;
            }
            Ok(ok)
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
