//! Acceptance gate. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits non-zero if any fails.
//!
//! Run with `cargo test --test acceptance`.

use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Matrix6, Rotation3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hexinspect::allocation::{self, CantSweep};
use hexinspect::controller::ControllerPhase;
use hexinspect::harness::{self, campaign, Scenario};
use hexinspect::task_space::{self, TaskSpec};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario(name: &str) -> Scenario {
    Scenario::builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn allocation_round_trip() -> Check {
    let s = scenario("interaction_s1");
    let geom = s.config.geometry.geometry().with_cant(25f64.to_radians());
    let m = allocation::build_mixing_matrix(&geom);
    let inv = m.inverse().ok_or(format!("rank {}", m.rank))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let w = Vector6::from_fn(|_, _| rng.random_range(-20.0..20.0));
        let back = m.entries * (inv * w);
        worst = worst.max((back - w).norm() / w.norm());
    }
    ensure(m.rank == 6 && worst < 1e-9, format!("rank {}, worst relative error {worst:.2e}", m.rank))
}

fn cant_optimization() -> Check {
    let s = scenario("interaction_s1");
    let c = &s.config;
    let weight = c.inertial.mass * hexinspect::STANDARD_GRAVITY;
    let best = allocation::optimize_cant_angle(&c.geometry.geometry(), c.geometry.limits(), weight, 6.0, CantSweep::default())
        .map_err(|e| e.to_string())?;
    ensure(
        (best.cant_deg - 25.0).abs() <= 0.5,
        format!("alpha = {:.1} deg, lateral capacity {:.3} N", best.cant_deg, best.lateral_capacity),
    )
}

fn contact_calibration() -> Check {
    let s = scenario("ballistic_calibration");
    let rows = harness::calibrate_contact(&s, &[0.3, 0.5, 0.7, 0.9]).map_err(|e| e.to_string())?;
    let worst = rows.iter().map(|(e, m)| (m - e).abs()).fold(0.0, f64::max);
    let detail = rows.iter().map(|(e, m)| format!("{e}->{m:.3}")).collect::<Vec<_>>().join(" ");
    ensure(worst <= 0.03, format!("{detail}, worst {worst:.4}"))
}

/// Largest speed away from the wall while the controller is in Impact or Contact.
fn rebound_while_engaged(outcome: &harness::RunOutcome) -> f64 {
    outcome
        .log
        .rows
        .iter()
        .filter(|r| matches!(r.phase, Some(ControllerPhase::Impact | ControllerPhase::Contact)))
        .map(|r| -r.normal_velocity)
        .fold(0.0, f64::max)
}

fn entry_time(outcome: &harness::RunOutcome, phase: ControllerPhase) -> Option<f64> {
    outcome.transitions.iter().find(|t| t.to == phase).map(|t| t.time)
}

fn no_bounce_impact() -> Check {
    let s = scenario("interaction_s1");
    let out = harness::run_scenario(&s).map_err(|e| e.to_string())?;
    use ControllerPhase::*;
    let seq = out.log.phase_sequence();
    let v_i = s.config.setpoints.approach_velocity;
    let impact_rows: Vec<_> = out.log.rows.iter().filter(|r| r.phase == Some(Impact)).collect();
    let rebound = impact_rows.iter().map(|r| -r.normal_velocity).fold(0.0, f64::max);
    let duration = match (entry_time(&out, Impact), entry_time(&out, Contact)) {
        (Some(a), Some(b)) => b - a,
        _ => f64::NAN,
    };
    ensure(
        seq == [Approach, Impact, Contact, Retreat] && rebound < 0.05 * v_i && (0.010..=0.060).contains(&duration),
        format!("phases {seq:?}, impact rebound {:.1}% of v_i, impact {:.0} ms", 100.0 * rebound / v_i, duration * 1e3),
    )
}

fn force_regulation() -> Check {
    let s = scenario("interaction_s1");
    let out = harness::run_scenario(&s).map_err(|e| e.to_string())?;
    let target = s.config.setpoints.force_setpoint;
    let hold: Vec<f64> = out
        .log
        .rows
        .iter()
        .filter(|r| r.phase == Some(ControllerPhase::Contact))
        .map(|r| r.sensed_force)
        .collect();
    let held_for = hold.len() as f64 * s.config.sim.dt;
    let mean_err = hold.iter().map(|f| (f - target).abs()).sum::<f64>() / hold.len().max(1) as f64;
    let min = hold.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(
        mean_err < 0.05 && min > 0.0 && held_for >= s.config.setpoints.contact_duration - 1e-9,
        format!("hold {held_for:.2} s, mean |error| {:.1} mN, min force {min:.3} N", mean_err * 1e3),
    )
}

fn bounce_under_low_gain() -> Check {
    let base = scenario("interaction_s1");
    let kvf = base.config.gains.impact_kvf / 10.0;
    let s = base
        .with_override("gains.impact_kvf", toml::Value::Float(kvf))
        .map_err(|e| e.to_string())?;
    let out = harness::run_scenario(&s).map_err(|e| e.to_string())?;
    let v_i = s.config.setpoints.approach_velocity;
    let rebound = rebound_while_engaged(&out);
    ensure(rebound > 0.2 * v_i, format!("k_vf {kvf:.4}: rebound {:.0}% of v_i", 100.0 * rebound / v_i))
}

struct TableRun {
    /// (surface, configured e, estimates in trial order)
    surfaces: Vec<(String, f64, Vec<hexinspect::inspection::SurfaceEstimate>)>,
}

fn table_campaign() -> Result<TableRun, String> {
    let s = scenario("inspection_table1");
    let out = campaign::run_campaign(&s, &[]).map_err(|e| e.to_string())?;
    if !out.is_complete() {
        return Err(format!("{} grid points failed: {:?}", out.failures.len(), out.failures));
    }
    let surfaces = s
        .config
        .surfaces
        .iter()
        .map(|sc| {
            let mut est: Vec<_> = out.estimates.iter().filter(|e| e.surface == sc.label).cloned().collect();
            est.sort_by_key(|e| e.trial_id);
            (sc.label.clone(), sc.restitution, est)
        })
        .collect();
    Ok(TableRun { surfaces })
}

fn table_ordering(run: &TableRun) -> Check {
    let [(a, e_a, s1), (b, e_b, s2)] = &run.surfaces[..] else {
        return Err(format!("expected two surfaces, got {}", run.surfaces.len()));
    };
    if s1.len() != 4 || s2.len() != 4 {
        return Err(format!("expected 4 trials per surface, got {} and {}", s1.len(), s2.len()));
    }
    let mean = |v: &[hexinspect::inspection::SurfaceEstimate]| v.iter().map(|e| e.restitution).sum::<f64>() / v.len() as f64;
    let gap = mean(s1) - mean(s2);
    let ordered = s1.iter().zip(s2).all(|(x, y)| {
        x.stiffness_kt > y.stiffness_kt
            && x.stiffness_ke > y.stiffness_ke
            && matches!((x.deflection_stiffness, y.deflection_stiffness), (Some(p), Some(q)) if p > q)
    });
    let worst_cor = s1
        .iter()
        .map(|e| (e.restitution - e_a).abs())
        .chain(s2.iter().map(|e| (e.restitution - e_b).abs()))
        .fold(0.0, f64::max);
    ensure(
        gap > 0.2 && ordered && worst_cor <= 0.1,
        format!(
            "mean e {a} {:.3} vs {b} {:.3}, stiffness ordered in every trial: {ordered}, worst e error {worst_cor:.3}",
            mean(s1),
            mean(s2)
        ),
    )
}

fn velocity_invariance(run: &TableRun) -> Check {
    let spreads: Vec<(String, f64)> = run
        .surfaces
        .iter()
        .map(|(label, _, est)| {
            let (lo, hi) = est
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.restitution), hi.max(e.restitution)));
            (label.clone(), hi - lo)
        })
        .collect();
    let detail = spreads.iter().map(|(l, s)| format!("{l} spread {s:.4}")).collect::<Vec<_>>().join(", ");
    ensure(spreads.iter().all(|(_, s)| *s < 0.05), detail)
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    Rotation3::from_euler_angles(rng.random_range(-3.1..3.1), rng.random_range(-1.5..1.5), rng.random_range(-3.1..3.1)).into_inner()
}

fn projector_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let spec = TaskSpec {
            sigma_f: [0; 3].map(|_| f64::from(rng.random_range(0..2u8))),
            sigma_tau: [0; 3].map(|_| f64::from(rng.random_range(0..2u8))),
            rotation_f: random_rotation(&mut rng),
            rotation_tau: random_rotation(&mut rng),
        };
        let (o, ob) = task_space::build_selection(&spec).map_err(|e| e.to_string())?;
        let i = Matrix6::identity();
        worst = worst
            .max((o + ob - i).amax())
            .max((o * ob).amax())
            .max((o * o - o).amax());
    }
    ensure(worst <= 1e-12, format!("worst residual {worst:.1e} over 100 specs"))
}

fn determinism() -> Check {
    let mut lines = Vec::new();
    for name in Scenario::BUILTIN {
        let s = scenario(name);
        let a = harness::run_scenario(&s).map_err(|e| e.to_string())?.log.to_bytes();
        let b = harness::run_scenario(&s).map_err(|e| e.to_string())?.log.to_bytes();
        if a != b {
            return Err(format!("{name}: logs differ"));
        }
        lines.push(format!("{name} {} B", a.len()));
    }
    Ok(lines.join(", "))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, budget: Duration, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if took <= budget => (true, d),
            Ok(d) => (false, format!("{d}; took {took:.2?}, budget {budget:?}")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!("{} {id:>2} {name}: {detail} [{took:.2?}]", if ok { "PASS" } else { "FAIL" });
    };
    let secs = Duration::from_secs;

    report(1, "allocation round trip", secs(1), &mut allocation_round_trip);
    report(2, "cant-angle optimization", secs(1), &mut cant_optimization);
    report(3, "contact calibration", secs(5), &mut contact_calibration);
    report(4, "no-bounce impact", secs(10), &mut no_bounce_impact);
    report(5, "force regulation", secs(10), &mut force_regulation);
    report(6, "bounce under low gain", secs(10), &mut bounce_under_low_gain);

    let start = Instant::now();
    let table = table_campaign();
    let campaign_time = start.elapsed();
    let with_table = |check: fn(&TableRun) -> Check| {
        let t = &table;
        move || {
            t.as_ref()
                .map_err(Clone::clone)
                .and_then(check)
                .map(|d| format!("{d}; campaign {campaign_time:.2?}"))
        }
    };
    // Both table criteria share one campaign; its runtime is charged to each.
    let budget = secs(30).saturating_sub(campaign_time);
    report(7, "surface ordering", budget, &mut with_table(table_ordering));
    report(8, "velocity invariance", budget, &mut with_table(velocity_invariance));

    report(9, "projector algebra", secs(1), &mut projector_algebra);
    report(10, "determinism", secs(20), &mut determinism);

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
