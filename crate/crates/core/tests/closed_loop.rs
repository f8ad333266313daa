//! Full-simulation behaviour of the shipped interaction and inspection scenarios.

use hexinspect::controller::{check_transition, ControllerPhase};
use hexinspect::harness::{run_scenario, RunOutcome, Scenario};
use hexinspect::inspection::{detect_episode, estimate_restitution};

fn run(name: &str) -> (Scenario, RunOutcome) {
    let s = Scenario::builtin(name).unwrap();
    let out = run_scenario(&s).unwrap();
    (s, out)
}

fn rows_in(out: &RunOutcome, phase: ControllerPhase) -> impl Iterator<Item = &hexinspect::harness::log::LogRow> {
    out.log.rows.iter().filter(move |r| r.phase == Some(phase))
}

#[test]
fn nominal_runs_never_saturate_and_finish() {
    for name in ["interaction_s1", "interaction_s2"] {
        let (_, out) = run(name);
        assert!(out.terminal, "{name} did not finish");
        assert_eq!(out.log.rows.iter().filter(|r| r.saturated).count(), 0, "{name}");
        for t in &out.transitions {
            check_transition(t.from, t.to).unwrap();
        }
    }
}

#[test]
fn soft_wall_holds_force_too() {
    let (s, out) = run("interaction_s2");
    let hold: Vec<f64> = rows_in(&out, ControllerPhase::Contact).map(|r| r.sensed_force).collect();
    let err = hold.iter().map(|f| (f - s.config.setpoints.force_setpoint).abs()).sum::<f64>() / hold.len() as f64;
    assert!(err < 0.05, "mean error {err}");
    assert!(hold.iter().all(|&f| f > 0.0));
}

#[test]
fn altitude_and_lateral_hold() {
    let (s, out) = run("interaction_s1");
    let z0 = s.config.setpoints.hold_altitude;
    let worst_z = out.log.rows.iter().map(|r| (r.position[2] - z0).abs()).fold(0.0, f64::max);
    let worst_x = out.log.rows.iter().map(|r| r.op_position[0].abs()).fold(0.0, f64::max);
    assert!(worst_z < 0.005, "altitude error {worst_z}");
    assert!(worst_x < 0.005, "lateral error {worst_x}");
}

#[test]
fn approach_tracks_commanded_speed() {
    let (s, out) = run("interaction_s1");
    let v = s.config.setpoints.approach_velocity;
    let last = rows_in(&out, ControllerPhase::Approach).last().unwrap();
    assert!((last.normal_velocity - v).abs() < 0.01 * v, "{}", last.normal_velocity);
}

#[test]
fn retreat_backs_off_the_wall() {
    let (s, out) = run("interaction_s1");
    let last = out.log.rows.last().unwrap();
    assert_eq!(last.phase, Some(ControllerPhase::Retreat));
    assert!(!last.in_contact);
    assert!((last.normal_velocity + s.config.setpoints.retreat_velocity).abs() < 0.01);
}

#[test]
fn inspection_touch_ends_on_loss_of_contact() {
    let (s, out) = run("inspection_table1");
    assert!(out.terminal);
    let contact = out.transitions.iter().find(|t| t.to == ControllerPhase::Contact).unwrap();
    let retreat = out.transitions.iter().find(|t| t.to == ControllerPhase::Retreat).unwrap();
    assert!(retreat.time - contact.time < s.config.setpoints.contact_duration);
}

#[test]
fn live_detector_agrees_with_the_log() {
    let (s, out) = run("inspection_table1");
    let live = out.live_episode.expect("episode closed during the run");
    let post = detect_episode(&out.log.episode_samples(), s.detector_config()).unwrap();
    assert_eq!(live, post);
    let e = estimate_restitution(&post).unwrap().value;
    assert!((e - s.active_surface().unwrap().restitution).abs() < 0.03, "e = {e}");
}

#[test]
fn ballistic_bounce_is_passive() {
    let (s, out) = run("ballistic_calibration");
    let ep = out.live_episode.expect("bounce completed");
    assert!(out.terminal);
    // Rebound kinetic energy never exceeds what came in.
    assert!(ep.rebound_velocity < ep.approach_velocity);
    let e = estimate_restitution(&ep).unwrap().value;
    assert!((e - s.active_surface().unwrap().restitution).abs() < 0.03);
}

#[test]
fn softer_wall_is_estimated_softer() {
    let base = Scenario::builtin("ballistic_calibration").unwrap();
    let deflection = |k: f64| {
        let s = base.with_override("surfaces.0.stiffness", toml::Value::Float(k)).unwrap();
        let out = run_scenario(&s).unwrap();
        let ep = out.live_episode.unwrap();
        hexinspect::inspection::estimate_stiffness(&ep, s.config.inertial.mass, s.config.end_effector.tool_stiffness, "w", 1)
            .unwrap()
            .deflection_stiffness
            .unwrap()
    };
    let ks = [300.0, 1000.0, 3000.0, 10000.0];
    let est: Vec<f64> = ks.iter().map(|&k| deflection(k)).collect();
    assert!(est.windows(2).all(|w| w[0] < w[1]), "{est:?}");
}

#[test]
fn short_run_is_not_terminal() {
    let s = Scenario::builtin("interaction_s1")
        .unwrap()
        .with_override("sim.max_time", toml::Value::Float(0.5))
        .unwrap();
    let out = run_scenario(&s).unwrap();
    assert!(!out.terminal);
    assert_eq!(out.log.rows.len(), 500);
}

#[test]
fn constant_disturbance_is_rejected() {
    let s = Scenario::builtin("interaction_s1")
        .unwrap()
        .with_override("inertial.disturbance", toml::Value::try_from([0.5, 0.0, 0.3, 0.0, 0.0, 0.05]).unwrap())
        .unwrap();
    let out = run_scenario(&s).unwrap();
    assert!(out.terminal);
    let last_approach = rows_in(&out, ControllerPhase::Approach).last().unwrap();
    assert!(last_approach.op_position[0].abs() < 0.02, "x drift {}", last_approach.op_position[0]);
}
