//! Campaign grids: ordering, seeding and the estimates table.

use hexinspect::harness::{campaign, run_scenario, scenario, Scenario};
use hexinspect::inspection::{classify_surfaces, write_estimates_table, Metric, Verdict};

#[test]
fn table_campaign_ranks_hard_wall_first() {
    let s = Scenario::builtin("inspection_table1").unwrap();
    let out = campaign::run_campaign(&s, &[]).unwrap();
    assert!(out.is_complete(), "{:?}", out.failures);
    assert_eq!(out.points.len(), 8);
    assert_eq!(out.estimates.len(), 8);

    let report = classify_surfaces(&out.estimates).unwrap();
    assert!(report.is_harder("S1", "S2"));
    for m in Metric::ALL {
        assert_eq!(
            report.verdict(m, "S1", "S2"),
            Some(&Verdict::Higher {
                higher: "S1".into(),
                lower: "S2".into()
            }),
            "{m:?}"
        );
    }

    let mut table = Vec::new();
    write_estimates_table(&mut table, &out.estimates).unwrap();
    let text = String::from_utf8(table).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with("trial,surface,restitution,stiffness_kt,stiffness_ke,deflection_stiffness"));
}

#[test]
fn grid_points_match_standalone_runs() {
    let s = Scenario::builtin("inspection_table1").unwrap();
    let axes = [scenario::parse_sweep("setpoints.approach_velocity=0.12,0.22").unwrap()];
    let out = campaign::run_campaign(&s, &axes).unwrap();
    for p in &out.points {
        assert_eq!(p.seed, s.config.sim.seed + p.index as u64);
        let mut alone = s.with_seed(p.seed).unwrap();
        for (k, v) in &p.overrides {
            alone = alone.with_override(k, v.clone()).unwrap();
        }
        let expected = run_scenario(&alone).unwrap().log.to_bytes();
        assert_eq!(p.outcome.as_ref().unwrap().log.to_bytes(), expected, "point {}", p.index);
    }
    assert_eq!(out.points.iter().map(|p| p.trial_id).collect::<Vec<_>>(), [1, 2]);
}

#[test]
fn bad_point_is_reported_not_fatal() {
    let s = Scenario::builtin("inspection_table1").unwrap();
    let axes = [scenario::parse_sweep("setpoints.approach_velocity=0.2,-1.0").unwrap()];
    let out = campaign::run_campaign(&s, &axes).unwrap();
    assert!(!out.is_complete());
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].index, 1);
    assert!(out.points[0].outcome.is_ok());
}

#[test]
fn interaction_campaign_has_no_estimates() {
    let s = Scenario::builtin("interaction_s1")
        .unwrap()
        .with_override("sim.max_time", toml::Value::Float(0.2))
        .unwrap();
    let axes = [scenario::parse_sweep("sim.seed=1,2").unwrap()];
    let out = campaign::run_campaign(&s, &axes).unwrap();
    assert!(out.is_complete());
    assert!(out.estimates.is_empty());
}
