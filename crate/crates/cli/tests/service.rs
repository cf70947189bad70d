use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use mmsa::formats::load_model;
use mmsa::ops::Context;
use mmsa::service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn state(model: Option<&str>) -> Arc<AppState> {
    let session = model.map(|m| load_model(&models().join(m)).unwrap());
    Arc::new(AppState::new(Context::default(), session, Some(models())))
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = router(state.clone()).oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

#[tokio::test]
async fn no_model_is_not_found() {
    let s = state(None);
    let (status, body) = call(&s, "GET", "/api/model", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "NoModelLoaded");
    let (status, _) = call(&s, "POST", "/api/covary", Some(json!({"vary": {"theta1": 0.4}}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn covary_on_a_single_block() {
    let s = state(Some("raw_block.json"));
    let (status, body) =
        call(&s, "POST", "/api/covary", Some(json!({"vary": {"theta1": 0.4}, "scheme": "proportional"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let theta: Vec<f64> = serde_json::from_value(body["theta_new"].clone()).unwrap();
    approx::assert_abs_diff_eq!(theta[0], 0.4, epsilon = 1e-15);
    approx::assert_abs_diff_eq!(theta[1], 0.2 * 0.6 / 0.9, epsilon = 1e-15);
    approx::assert_abs_diff_eq!(theta[2], 0.7 * 0.6 / 0.9, epsilon = 1e-15);
}

#[tokio::test]
async fn upload_swaps_the_snapshot() {
    let s = state(None);
    let (status, body) = call(&s, "POST", "/api/model", Some(json!({"file": "three_var_bn.json"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["n_atoms"], 27);
    assert_eq!(body["n_params"], 39);

    let doc: Value = serde_json::from_str(&std::fs::read_to_string(models().join("raw_block.json")).unwrap()).unwrap();
    let (status, body) = call(&s, "POST", "/api/model", Some(doc)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let (_, body) = call(&s, "GET", "/api/model", None).await;
    assert_eq!(body["n_atoms"], 3);
}

#[tokio::test]
async fn invalid_uploads_are_rejected() {
    let s = state(Some("raw_block.json"));
    let (status, body) = call(&s, "POST", "/api/model", Some(json!({"file": "bad_bn.json"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "NonSimplexCpt");
    let (status, body) = call(&s, "POST", "/api/model", Some(json!({"file": "../models/three_var_bn.json"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "InvalidFileName");
    let (status, body) = call(&s, "POST", "/api/model", Some(json!({"foo": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "UnknownFormat");
    // The old snapshot survives.
    let (_, body) = call(&s, "GET", "/api/model", None).await;
    assert_eq!(body["n_atoms"], 3);
}

#[tokio::test]
async fn malformed_requests_are_bad_requests() {
    let s = state(Some("raw_block.json"));
    let (status, body) = call(&s, "POST", "/api/covary", Some(json!({"vary": {"nope": 0.4}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "UnknownParameter");
    assert!(body["error"]["message"].as_str().unwrap().contains("nope"));

    let request = Request::builder().method("POST").uri("/api/covary").body(Body::from("{")).unwrap();
    let response = router(s.clone()).oneshot(request).await.unwrap();
    assert_eq!(response.status(), StatusCode::BAD_REQUEST);

    let (status, body) = call(&s, "GET", "/api/nothing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], "NoSuchEndpoint");
}

#[tokio::test]
async fn scheme_domain_errors_are_unprocessable() {
    let s = state(Some("raw_block.json"));
    // theta2 = 0.2 is strictly below theta3 only; 0.9 would overtake it.
    let (status, body) = call(
        &s,
        "POST",
        "/api/covary",
        Some(json!({"vary": {"theta2": 0.9}, "scheme": "order_preserving"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert!(body["error"]["code"].is_string());
}

#[tokio::test]
async fn projection_guard_is_payload_too_large() {
    let s = state(Some("three_var_bn.json"));
    // One varied parameter in each of six ternary blocks leaves six free coordinates.
    let vary = json!({
        "theta1": 0.3, "theta21": 0.3, "theta311": 0.3,
        "theta312": 0.3, "theta313": 0.3, "theta321": 0.3
    });
    let (status, body) = call(&s, "POST", "/api/project", Some(json!({"vary": vary}))).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE, "{body}");
    assert_eq!(body["error"]["class"], "too_large");
}

#[tokio::test]
async fn classify_and_project_on_the_two_level_tree() {
    let s = state(Some("two_level_tree.json"));
    let vary = json!({"theta1": 0.4, "psi1": 0.2});
    let (status, body) = call(&s, "POST", "/api/classify", Some(json!({"vary": vary}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["kind"], "conditionally_dependent");
    let (status, body) = call(&s, "POST", "/api/project", Some(json!({"vary": vary, "grid": 60}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["matches_proportional"], true);
}

#[tokio::test]
async fn sensitivity_and_divergence_answer() {
    let s = state(Some("three_var_bn.json"));
    let (status, body) = call(
        &s,
        "POST",
        "/api/sensitivity",
        Some(json!({"vary": ["theta2"], "event": "Y3=3", "grid": 9})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["curves"].as_array().unwrap().len(), 3);
    assert_eq!(body["curves"][0]["points"].as_array().unwrap().len(), 9);

    let (status, body) = call(
        &s,
        "POST",
        "/api/divergence",
        Some(json!({"vary": {"theta2": 0.6}, "metrics": ["kl", "cd", "phi:hellinger"]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["values"].as_array().unwrap().len(), 3);

    let (status, body) = call(&s, "POST", "/api/divergence", Some(json!({"metrics": ["kl"]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "MissingComparison");
}

#[tokio::test]
async fn summary_carries_slider_bounds() {
    let s = state(Some("raw_block.json"));
    let (_, body) = call(&s, "GET", "/api/model", None).await;
    assert_eq!(body["grid_default"], 99);
    let params = body["parameters"].as_array().unwrap();
    // Block (0.1, 0.2, 0.7): positions 1 and 2 of 3 give bounds 1/3 and 1/2.
    approx::assert_abs_diff_eq!(params[0]["order_preserving_max"].as_f64().unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    approx::assert_abs_diff_eq!(params[1]["order_preserving_max"].as_f64().unwrap(), 0.5, epsilon = 1e-15);
    assert!(params[2]["order_preserving_max"].is_null());
}

#[tokio::test]
async fn single_parameter_is_independent_and_optimal() {
    let s = state(Some("two_level_tree.json"));
    let (status, body) = call(&s, "POST", "/api/classify", Some(json!({"vary": {"psi2": 0.5}}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["kind"], "independent");
    assert_eq!(body["proportional_optimal"], true);

    let (_, body) = call(&s, "POST", "/api/classify", Some(json!({"vary": {"theta2": 0.3, "psi1": 0.2}}))).await;
    assert_eq!(body["kind"], "other");
    assert_eq!(body["proportional_optimal"], false);
}
