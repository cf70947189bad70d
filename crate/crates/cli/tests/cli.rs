use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use mmsa::formats::load_model;
use mmsa::ops::Context;
use mmsa::service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn mmsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmsa"))
        .args(args)
        .env_remove("MMSA_GRID_DEFAULT")
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = mmsa(&["validate", "--model", &model("three_var_bn.json")]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(stdout_json(&ok)["clean"], true);

    for bad in ["bad_bn.json", "same_stage_path_tree.json"] {
        let out = mmsa(&["validate", "--model", &model(bad)]);
        assert_eq!(out.status.code(), Some(1), "{bad}");
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["clean"], false);
        assert!(!report["problems"].as_array().unwrap().is_empty());
    }
}

#[test]
fn probability_of_an_event() {
    let out = stdout_json(&mmsa(&["prob", "--model", &model("three_var_bn.json"), "--event", "Y3=3"]));
    approx::assert_abs_diff_eq!(out["probability"].as_f64().unwrap(), 0.343, epsilon = 1e-12);

    let out = mmsa(&["prob", "--model", &model("three_var_bn.json"), "--event", "Y3=7"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnknownState"));
}

#[test]
fn sensitivity_curves_cross_together() {
    let out = stdout_json(&mmsa(&[
        "sensitivity", "--model", &model("three_var_bn.json"), "--vary", "theta2", "--event", "Y3=3",
    ]));
    let curves = out["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 3);
    let series = |c: &Value| -> Vec<(f64, Option<f64>)> {
        c["points"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| (p["targets"][0].as_f64().unwrap(), p["probability"].as_f64()))
            .collect()
    };
    for c in &curves[..2] {
        let s = series(c);
        assert_eq!(s.len(), 99);
        let cross = s
            .windows(2)
            .find(|w| (w[0].1.unwrap() - 0.3) * (w[1].1.unwrap() - 0.3) <= 0.0)
            .map(|w| w[0].0)
            .expect("no crossing of 0.3");
        assert!((0.55..=0.65).contains(&cross), "{} crosses at {cross}", c["scheme"]);
    }
    let op = series(&curves[2]);
    assert!(op.iter().filter_map(|p| p.1).all(|p| p > 0.3));
    assert!(op.iter().any(|p| p.1.is_none()));
}

#[test]
fn grid_option_and_environment() {
    let args = ["sensitivity", "--model", &model("three_var_bn.json"), "--vary", "theta2", "--event", "Y3=3"];
    let mut with_grid = args.to_vec();
    with_grid.extend(["--grid", "2", "--schemes", "proportional"]);
    let out = stdout_json(&mmsa(&with_grid));
    assert_eq!(out["curves"][0]["points"].as_array().unwrap().len(), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_mmsa"))
        .args(args)
        .env("MMSA_GRID_DEFAULT", "4")
        .output()
        .unwrap();
    assert_eq!(stdout_json(&out)["curves"][1]["points"].as_array().unwrap().len(), 4);
}

#[test]
fn csv_output_is_tabular() {
    let out = mmsa(&["covary", "--model", &model("raw_block.json"), "--vary", "theta1=0.4", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,label,theta_old,theta_new");
    assert_eq!(lines[1], "0,theta1,0.10000000000000001,0.40000000000000002");
    assert_eq!(lines.len(), 4);

    let out = mmsa(&["project", "--model", &model("raw_block.json"), "--vary", "theta1=0.4", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_verdicts() {
    let cases = [
        ("two_level_tree.json", ["theta1=0.4", "psi1=0.2"], "conditionally_dependent", true),
        ("two_level_tree.json", ["theta2=0.3", "psi1=0.2"], "other", false),
        ("three_var_bn.json", ["theta22=0.5", "theta311=0.3"], "independent", true),
        ("shared_stage_tree.json", ["theta1=0.3", "psi1=0.3"], "fully_dependent", true),
    ];
    for (file, vary, kind, matches) in cases {
        let out = mmsa(&["analyze", "--model", &model(file), "--vary", vary[0], "--vary", vary[1]]);
        let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        let report = stdout_json(&out);
        assert_eq!(report["kind"], kind, "{file} {vary:?}");
        assert_eq!(report["projection"]["matches_proportional"], matches, "{file} {vary:?}");
        assert!(stderr.contains(&format!("kind={kind}")), "{stderr}");
    }
}

#[test]
fn out_writes_a_file() {
    let dir = std::env::temp_dir().join(format!("mmsa-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("compiled.json");
    let out = mmsa(&["compile", "--model", &model("staged_tree.json"), "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let compiled: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(compiled["atoms"].as_array().unwrap().len(), 27);
    assert_eq!(compiled["params"].as_array().unwrap().len(), 33);
    assert_eq!(compiled["partition"].as_array().unwrap().len(), 11);

    // The compiled file loads back as a raw model with the same distribution.
    let again = stdout_json(&mmsa(&["compile", "--model", path.to_str().unwrap()]));
    assert_eq!(again["theta"], compiled["theta"]);
    std::fs::remove_dir_all(dir).unwrap();
}

async fn post(file: &str, uri: &str, body: Value) -> Value {
    let state = Arc::new(AppState::new(Context::default(), Some(load_model(&PathBuf::from(model(file))).unwrap()), None));
    let request = Request::builder().method("POST").uri(uri).body(Body::from(body.to_string())).unwrap();
    let response = router(state).oneshot(request).await.unwrap();
    assert!(response.status().is_success());
    serde_json::from_slice(&response.into_body().collect().await.unwrap().to_bytes()).unwrap()
}

#[tokio::test]
async fn cli_and_service_agree() {
    let cli = stdout_json(&mmsa(&["covary", "--model", &model("three_var_bn.json"), "--vary", "theta2=0.6"]));
    let http = post("three_var_bn.json", "/api/covary", json!({"vary": {"theta2": 0.6}})).await;
    assert_eq!(cli, http);

    let cli = stdout_json(&mmsa(&[
        "sensitivity", "--model", &model("three_var_bn.json"), "--vary", "theta2", "--event", "Y3=3", "--grid", "19",
    ]));
    let http = post(
        "three_var_bn.json",
        "/api/sensitivity",
        json!({"vary": ["theta2"], "event": "Y3=3", "grid": 19}),
    )
    .await;
    assert_eq!(cli, http);

    let cli = stdout_json(&mmsa(&[
        "analyze", "--model", &model("two_level_tree.json"), "--vary", "theta1=0.4", "--vary", "psi1=0.2",
    ]));
    let http = post("two_level_tree.json", "/api/classify", json!({"vary": {"theta1": 0.4, "psi1": 0.2}})).await;
    assert_eq!(cli, http);
}
