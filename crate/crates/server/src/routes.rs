use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use neuronhub_core::search::parse_query;
use neuronhub_core::store::{NotFound, Store};
use neuronhub_core::ServiceKind;
use serde_json::{json, Value};

use crate::ApiError;

type AppState = Arc<Store>;
type ApiResult = Result<Response, ApiError>;

pub fn api(store: AppState) -> Router {
    Router::new()
        .route("/api", get(list_models))
        .route("/api/{model}", get(model))
        .route("/api/{model}/neuron2graph-search", get(search))
        .route("/api/{model}/{service}/{layer}", get(layer))
        .route("/api/{model}/{service}/{layer}/{neuron}", get(neuron))
        .fallback(no_route)
        .method_not_allowed_fallback(no_route)
        .with_state(store)
}

async fn no_route(uri: Uri) -> ApiError {
    ApiError::no_route(uri.path())
}

fn json_response(body: Vec<u8>) -> Response {
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

/// Wraps raw payload JSON without re-encoding it.
fn envelope(model: &str, service: &str, layer: Option<u32>, neuron: Option<u32>, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() + 96);
    out.extend_from_slice(b"{\"model\":");
    out.extend_from_slice(&serde_json::to_vec(model).expect("string serializes"));
    out.extend_from_slice(b",\"service\":");
    out.extend_from_slice(&serde_json::to_vec(service).expect("string serializes"));
    if let Some(layer) = layer {
        out.extend_from_slice(format!(",\"layer\":{layer}").as_bytes());
    }
    if let Some(neuron) = neuron {
        out.extend_from_slice(format!(",\"neuron\":{neuron}").as_bytes());
    }
    out.extend_from_slice(b",\"data\":");
    out.extend_from_slice(data);
    out.push(b'}');
    out
}

fn parse_index(what: &str, raw: &str) -> Result<u64, ApiError> {
    if raw.is_empty() || !raw.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ApiError::invalid_index(what, raw));
    }
    raw.parse().map_err(|_| ApiError::invalid_index(what, raw))
}

fn parse_service(raw: &str) -> Result<ServiceKind, ApiError> {
    raw.parse().map_err(|_| ApiError::unknown_service(raw))
}

async fn list_models(State(store): State<AppState>) -> ApiResult {
    let models: Vec<_> = store.models().collect();
    Ok(json_response(serde_json::to_vec(&json!({ "data": models })).expect("serializes")))
}

async fn model(State(store): State<AppState>, Path(model): Path<String>) -> ApiResult {
    let meta = store.model(&model)?;
    let mut data = serde_json::to_value(meta).expect("serializes");
    let availability: serde_json::Map<String, Value> = ServiceKind::CONCRETE
        .iter()
        .chain([ServiceKind::All].iter())
        .map(|s| (s.name().to_string(), Value::Bool(meta.service_available(*s))))
        .collect();
    data["availability"] = Value::Object(availability);
    let data = serde_json::to_vec(&data).expect("serializes");
    Ok(json_response(envelope(&model, "metadata", None, None, &data)))
}

async fn layer(State(store): State<AppState>, Path((model, service, layer)): Path<(String, String, String)>) -> ApiResult {
    let service = parse_service(&service)?;
    let layer = parse_index("layer", &layer)?;
    let available = store.layer_availability(&model, service, layer)?;
    let data = json!({
        "num_neurons": available.len(),
        "available_count": available.iter().filter(|a| **a).count(),
        "available": available,
    });
    let data = serde_json::to_vec(&data).expect("serializes");
    Ok(json_response(envelope(&model, service.name(), Some(layer as u32), None, &data)))
}

async fn neuron(
    State(store): State<AppState>,
    Path((model, service, layer, neuron)): Path<(String, String, String, String)>,
) -> ApiResult {
    let service = parse_service(&service)?;
    let layer = parse_index("layer", &layer)?;
    let neuron = parse_index("neuron", &neuron)?;
    let data = if service == ServiceKind::All {
        all_services(&store, &model, layer, neuron)?
    } else {
        store.get(&model, service, layer, neuron)?.to_vec()
    };
    Ok(json_response(envelope(
        &model,
        service.name(),
        Some(layer as u32),
        Some(neuron as u32),
        &data,
    )))
}

/// `{"<service>": payload | null}` over every concrete service.
fn all_services(store: &Store, model: &str, layer: u64, neuron: u64) -> Result<Vec<u8>, NotFound> {
    let present = store.get_all(model, layer, neuron)?;
    let mut out = b"{".to_vec();
    for (i, service) in ServiceKind::CONCRETE.iter().enumerate() {
        if i > 0 {
            out.push(b',');
        }
        out.extend_from_slice(format!("\"{}\":", service.name()).as_bytes());
        match present.iter().find(|(s, _)| s == service).and_then(|(_, p)| *p) {
            Some(payload) => out.extend_from_slice(payload),
            None => out.extend_from_slice(b"null"),
        }
    }
    out.push(b'}');
    Ok(out)
}

async fn search(
    State(store): State<AppState>,
    Path(model): Path<String>,
    params: Result<Query<Vec<(String, String)>>, QueryRejection>,
) -> ApiResult {
    let Query(params) = params.map_err(|e| ApiError::malformed_query(e.body_text()))?;
    let raw = params
        .iter()
        .find(|(k, _)| k == "query")
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| ApiError::malformed_query("missing `query` parameter"))?;
    let meta = store.model(&model)?;
    let query = parse_query(raw)?;
    if !meta.service_available(ServiceKind::Neuron2Graph) {
        return Err(NotFound::ServiceUnavailable {
            model,
            service: ServiceKind::Neuron2Graph,
        }
        .into());
    }
    let hits = store.index(&model)?.search(&query);
    let data = serde_json::to_vec(&hits).expect("serializes");
    Ok(json_response(envelope(&model, "neuron2graph-search", None, None, &data)))
}
