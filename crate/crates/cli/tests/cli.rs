use std::fs;
use std::process::{Command, Output};

fn curvest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvest")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("curvest-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn sphere_equality_passes_and_writes_a_report() {
    let report = scratch("sphere.json");
    let out = curvest(&["verify", "--scenario", "sphere-equality.json", "--emit-report", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["scenario"], "sphere-equality");
    for check in json["checks"].as_array().unwrap() {
        let status = check["status"].as_str().unwrap();
        assert!(status == "pass" || status == "informational", "{check}");
    }
    for key in ["resolution", "tol", "jets"] {
        assert!(json["env"].get(key).is_some());
    }
}

#[test]
fn ellipsoid_samples_carry_curvatures_and_ratios() {
    let samples = scratch("ellipsoid.csv");
    let out = curvest(&["verify", "--scenario", "ellipsoid", "--emit-samples", samples.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&samples).unwrap();
    let header = text.lines().next().unwrap();
    for col in ["H1", "H2", "ratio_k1"] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
    assert_eq!(text.lines().count(), 1 + 24 * 24);
}

#[test]
fn k_equal_to_n_is_a_usage_error() {
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios/sphere-equality.json")).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["k_range"] = serde_json::json!([0, 2]);
    let path = scratch("k-equals-n.json");
    fs::write(&path, json.to_string()).unwrap();
    let out = curvest(&["verify", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[0, 1]"));
}

#[test]
fn malformed_scenarios_name_the_field() {
    let path = scratch("unknown-field.json");
    fs::write(&path, r#"{"name": "x", "colour": 1}"#).unwrap();
    let out = curvest(&["verify", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn tight_tolerance_turns_an_fd_scenario_into_a_failure() {
    let out = curvest(&["verify", "--scenario", "sphere-fd", "--tol", "1e-14"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_scenarios_and_bad_bounds_are_usage_errors() {
    assert_eq!(curvest(&["verify", "--scenario", "no-such-scenario"]).status.code(), Some(3));
    assert_eq!(curvest(&["sturm", "--G", "cubic(1)", "--T", "1"]).status.code(), Some(3));
    assert_eq!(curvest(&["verify", "--scenario", "ellipsoid", "--resolution", "4"]).status.code(), Some(3));
}

#[test]
fn lambda_for_a_unit_bound() {
    let out = curvest(&["lambda", "--G", "const(1)"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let e = std::f64::consts::E;
    assert!((json["lambda"].as_f64().unwrap() - e * e / (e - 1.0)).abs() < 1e-9);
}

#[test]
fn sturm_dumps_a_margin_table() {
    let csv = scratch("sturm.csv");
    let out = curvest(&["sturm", "--G", "sqrt_growth(1)", "--T", "3", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("t,g,g_prime,psi,margin"));
    assert_eq!(text.lines().count(), 1001);
}

#[test]
fn comparison_on_the_unit_sphere() {
    let out = curvest(&["comparison", "--b", "1", "--t", "0.7853981633974483"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((json["c_b"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(curvest(&["comparison", "--b", "1", "--t", "2"]).status.code(), Some(3));
}

#[test]
fn list_scenarios_names_every_bundled_file() {
    let out = curvest(&["list-scenarios"]);
    let names = String::from_utf8(out.stdout).unwrap();
    assert!(names.lines().any(|l| l == "minkowski-hyperboloid"));
    assert_eq!(names.lines().count(), curvest::harness::BUNDLED.len());
}
