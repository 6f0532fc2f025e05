use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use neuronhub_core::fixture::{demo_specs, generate, FixtureManifest};
use neuronhub_core::search::parse_query;
use neuronhub_core::store::{Store, StoreParams};
use neuronhub_core::ServiceKind;
use neuronhub_server::router;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Demo {
    store: Arc<Store>,
    manifests: Vec<FixtureManifest>,
}

fn demo() -> &'static Demo {
    static DEMO: OnceLock<Demo> = OnceLock::new();
    DEMO.get_or_init(|| {
        let mut store = Store::new(StoreParams::default(), 0);
        let mut manifests = Vec::new();
        for spec in demo_specs() {
            let f = generate(&spec).unwrap();
            manifests.push(f.manifest);
            store.ingest_model(f.meta, f.records).unwrap();
        }
        Demo {
            store: Arc::new(store),
            manifests,
        }
    })
}

async fn get(uri: &str) -> (StatusCode, Value, String) {
    let app = router(demo().store.clone(), None);
    let response = app
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap(), content_type)
}

fn payload(model: &str, service: ServiceKind, layer: u64, neuron: u64) -> Value {
    serde_json::from_slice(demo().store.get(model, service, layer, neuron).unwrap()).unwrap()
}

#[tokio::test]
async fn neuroscope_example_address() {
    let (status, body, ct) = get("/api/solu-8l/neuroscope/7/1423").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ct, "application/json");
    assert_eq!(body["model"], "solu-8l");
    assert_eq!(body["service"], "neuroscope");
    assert_eq!(body["layer"], 7);
    assert_eq!(body["neuron"], 1423);
    for k in 0..10 {
        assert!(!body["data"]["texts"][k]["tokens"].as_array().unwrap().is_empty());
    }
    assert_eq!(body["data"], payload("solu-8l", ServiceKind::Neuroscope, 7, 1423));
}

#[tokio::test]
async fn search_example() {
    let (status, body, _) = get("/api/solu-6l/neuron2graph-search?query=any:the").await;
    assert_eq!(status, StatusCode::OK);
    let hits = body["data"].as_array().unwrap();
    for hit in hits {
        assert_eq!(hit.as_object().unwrap().len(), 2);
        assert!(hit["layer"].is_u64() && hit["neuron"].is_u64());
    }
    let expected = demo()
        .store
        .index("solu-6l")
        .unwrap()
        .search(&parse_query("any:the").unwrap());
    assert_eq!(body["data"], serde_json::to_value(expected).unwrap());

    let (_, body, _) = get("/api/solu-6l/neuron2graph-search?query=any:%20%20Hello").await;
    assert_eq!(body["data"].as_array().unwrap().len(), 7);
    let (_, body, _) = get("/api/solu-6l/neuron2graph-search?query=any:hola").await;
    assert_eq!(body["data"], json!([]));
}

#[tokio::test]
async fn planted_counts_over_http() {
    let manifest = demo().manifests.iter().find(|m| m.model == "solu-6l").unwrap();
    for p in &manifest.planted {
        let (status, body, _) = get(&format!("/api/solu-6l/neuron2graph-search?query=any:{}", p.token)).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["data"].as_array().unwrap().len(), p.count, "{}", p.token);
    }
}

#[tokio::test]
async fn error_statuses() {
    let cases = [
        ("/api/nope/neuroscope/0/0", StatusCode::NOT_FOUND, "unknown-model"),
        ("/api/solu-8l/neuroscope/7/abc", StatusCode::BAD_REQUEST, "invalid-index"),
        ("/api/solu-8l/neuroscope/-1/0", StatusCode::BAD_REQUEST, "invalid-index"),
        ("/api/solu-8l/neuroscope/8/0", StatusCode::NOT_FOUND, "out-of-range"),
        ("/api/solu-8l/neuroscope/0/2048", StatusCode::NOT_FOUND, "out-of-range"),
        ("/api/solu-8l/neuroscope/7/1422", StatusCode::NOT_FOUND, "record-absent"),
        ("/api/solu-8l/neuron-explainer/0/0", StatusCode::SERVICE_UNAVAILABLE, "service-unavailable"),
        ("/api/gpt2-small/neuron2graph/0/0", StatusCode::SERVICE_UNAVAILABLE, "service-unavailable"),
        ("/api/solu-8l/bogus/0/0", StatusCode::NOT_FOUND, "unknown-service"),
        ("/api/solu-6l/neuron2graph-search?query=the", StatusCode::BAD_REQUEST, "malformed-query"),
        ("/api/solu-6l/neuron2graph-search?query=most:the", StatusCode::BAD_REQUEST, "malformed-query"),
        ("/api/solu-6l/neuron2graph-search?query=any:%20", StatusCode::BAD_REQUEST, "malformed-query"),
        ("/api/solu-6l/neuron2graph-search", StatusCode::BAD_REQUEST, "malformed-query"),
        ("/api/gpt2-small/neuron2graph-search?query=any:the", StatusCode::SERVICE_UNAVAILABLE, "service-unavailable"),
        ("/api/nope/neuron2graph-search?query=any:the", StatusCode::NOT_FOUND, "unknown-model"),
        ("/api/solu-8l/neuroscope/7/1423/extra", StatusCode::NOT_FOUND, "no-route"),
        ("/elsewhere", StatusCode::NOT_FOUND, "no-route"),
    ];
    for (uri, status, code) in cases {
        let (got, body, _) = get(uri).await;
        assert_eq!(got, status, "{uri}");
        assert_eq!(body["error"], code, "{uri}");
        assert!(!body["message"].as_str().unwrap().is_empty());
        assert_eq!(body["status"], status.as_u16());
    }
}

#[tokio::test]
async fn model_and_layer_levels() {
    let (status, body, _) = get("/api").await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<_> = body["data"].as_array().unwrap().iter().map(|m| m["name"].clone()).collect();
    assert_eq!(names, vec![json!("gpt2-small"), json!("solu-6l"), json!("solu-8l")]);

    let (status, body, _) = get("/api/gpt2-small").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["data"]["num_layers"], 12);
    assert_eq!(body["data"]["availability"]["neuron-explainer"], true);
    assert_eq!(body["data"]["availability"]["neuron2graph"], false);
    assert_eq!(body["data"]["availability"]["all"], true);

    let (status, body, _) = get("/api/solu-8l/neuroscope/7").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["layer"], 7);
    assert!(body.get("neuron").is_none());
    assert_eq!(body["data"]["num_neurons"], 2048);
    assert_eq!(body["data"]["available"][1423], true);
    let bitmap = demo().store.layer_availability("solu-8l", ServiceKind::Neuroscope, 7).unwrap();
    assert_eq!(body["data"]["available"], json!(bitmap));
    assert_eq!(
        body["data"]["available_count"],
        bitmap.iter().filter(|b| **b).count()
    );

    let (status, _, _) = get("/api/solu-8l/all/3").await;
    assert_eq!(status, StatusCode::OK);
    let (status, _, _) = get("/api/solu-8l/neuroscope/9").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn all_merges_services() {
    let (status, body, _) = get("/api/solu-8l/all/7/1423").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["service"], "all");
    let data = body["data"].as_object().unwrap();
    assert_eq!(data.len(), 4);
    for service in [ServiceKind::Metadata, ServiceKind::Neuron2Graph, ServiceKind::Neuroscope] {
        let (_, single, _) = get(&format!("/api/solu-8l/{}/7/1423", service.name())).await;
        assert_eq!(data[service.name()], single["data"]);
    }
    assert_eq!(data["neuron-explainer"], Value::Null);
    assert!(data["neuron2graph"]["similar"].is_array());

    // Only explanations and snippets exist for gpt2-small.
    let neuron = demo().manifests.iter().find(|m| m.model == "gpt2-small").unwrap().neurons[0];
    let (_, body, _) = get(&format!("/api/gpt2-small/all/{}/{}", neuron.layer, neuron.neuron)).await;
    assert_eq!(body["data"]["neuron2graph"], Value::Null);
    assert!(body["data"]["neuron-explainer"]["score"].is_number());
}

#[tokio::test]
async fn every_record_matches_store() {
    let store = &demo().store;
    for meta in store.models() {
        for (service, id) in store.keys(&meta.name).unwrap() {
            let uri = format!("/api/{}/{}/{}/{}", meta.name, service.name(), id.layer, id.neuron);
            let (status, body, _) = get(&uri).await;
            assert_eq!(status, StatusCode::OK, "{uri}");
            assert_eq!(body["data"], payload(&meta.name, service, id.layer.into(), id.neuron.into()));
        }
    }
}

#[tokio::test]
async fn cors_and_viz_shell() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<!doctype html><div id=app></div>").unwrap();
    let app = router(demo().store.clone(), Some(dir.path()));
    let response = app
        .clone()
        .oneshot(
            Request::get("/viz/solu-8l/all/7/1423")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    assert!(String::from_utf8_lossy(&bytes).contains("id=app"));

    let response = app
        .oneshot(
            Request::get("/api")
                .header("origin", "http://example.org")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert!(response.headers().contains_key("access-control-allow-origin"));
}
