use curvest::harness::{bundled, run_scenario, ScenarioConfig, Status, BUNDLED};

fn run(name: &str) -> curvest::harness::VerificationReport {
    let config = ScenarioConfig::from_json(bundled(name).unwrap()).unwrap();
    run_scenario(&config).unwrap().report
}

#[test]
fn every_bundled_scenario_passes() {
    for (name, _) in BUNDLED {
        let report = run(name);
        for c in &report.checks {
            println!("{name:24} {:32} {:?} {:?}", c.id, c.status, c.residual);
        }
        assert_eq!(report.exit_code(), 0, "{name}");
    }
}

#[test]
fn ellipsoid_margin_matches_the_equator_value() {
    let report = run("ellipsoid");
    // equator: kappa = (1, 1/0.36), H_2/H_1 = 25/17, r = 1
    let margin = report.check("estimate.ratio.k1").unwrap().residual.unwrap();
    assert!((margin - (25.0 / 17.0 - 1.0)).abs() < 1e-6, "{margin}");
    assert_eq!(report.check("estimate.ratio.k1").unwrap().status, Status::Pass);
}
