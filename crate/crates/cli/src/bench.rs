//! HTTP load generator against a running server.
//!
//! Valid paths are discovered through the API itself: the model list, then
//! the per-layer availability bitmaps. `concurrency` workers each issue
//! requests back to back, choosing uniformly among the discovered paths,
//! until the duration elapses or the request budget is spent.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use reqwest::{Client, Url};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndpointClass {
    #[serde(rename = "neuroscope")]
    Neuroscope,
    #[serde(rename = "neuron2graph")]
    Neuron2Graph,
    #[serde(rename = "neuron-explainer")]
    NeuronExplainer,
    #[serde(rename = "search")]
    Search,
}

impl EndpointClass {
    pub const ALL: [EndpointClass; 4] = [
        EndpointClass::Neuroscope,
        EndpointClass::Neuron2Graph,
        EndpointClass::NeuronExplainer,
        EndpointClass::Search,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EndpointClass::Neuroscope => "neuroscope",
            EndpointClass::Neuron2Graph => "neuron2graph",
            EndpointClass::NeuronExplainer => "neuron-explainer",
            EndpointClass::Search => "search",
        }
    }

    /// Service whose records back this class.
    fn service(self) -> &'static str {
        match self {
            EndpointClass::Search => "neuron2graph",
            other => other.name(),
        }
    }
}

impl fmt::Display for EndpointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EndpointClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EndpointClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown endpoint class {s:?}; expected neuroscope, neuron2graph, neuron-explainer or search"))
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("server unreachable at {url}: {reason}")]
    ServerUnreachable { url: String, reason: String },
    #[error("invalid server url {0:?}")]
    InvalidUrl(String),
    #[error("discovery failed: {0}")]
    Discovery(String),
    #[error("no model serves {0}")]
    NoModel(EndpointClass),
    #[error("model {model} has no {class} paths to request")]
    NoPaths { model: String, class: EndpointClass },
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub server: String,
    pub class: EndpointClass,
    pub model: Option<String>,
    pub concurrency: usize,
    pub duration: Duration,
    pub max_requests: Option<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub endpoint_class: EndpointClass,
    pub model: String,
    pub concurrency: usize,
    pub distinct_paths: usize,
    pub total_requests: u64,
    pub non_200: u64,
    pub transport_errors: u64,
    pub wall_time_s: f64,
    pub requests_per_second: f64,
    pub latency_ms: Percentiles,
}

impl BenchReport {
    pub fn all_ok(&self) -> bool {
        self.non_200 == 0 && self.transport_errors == 0
    }

    pub fn meets(&self, min_rps: Option<f64>) -> bool {
        self.all_ok() && min_rps.is_none_or(|floor| self.requests_per_second >= floor)
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn percentiles(mut latencies_ms: Vec<f64>) -> Percentiles {
    latencies_ms.sort_by(f64::total_cmp);
    Percentiles {
        p50: nearest_rank(&latencies_ms, 50.0),
        p95: nearest_rank(&latencies_ms, 95.0),
        p99: nearest_rank(&latencies_ms, 99.0),
        max: latencies_ms.last().copied().unwrap_or(0.0),
    }
}

fn base_url(server: &str) -> Result<Url, BenchError> {
    let mut url = Url::parse(server).map_err(|_| BenchError::InvalidUrl(server.to_string()))?;
    if !url.path().ends_with('/') {
        let path = format!("{}/", url.path());
        url.set_path(&path);
    }
    Ok(url)
}

async fn get_json(client: &Client, url: Url) -> Result<Value, BenchError> {
    let response = client.get(url.clone()).send().await.map_err(|e| BenchError::ServerUnreachable {
        url: url.to_string(),
        reason: e.to_string(),
    })?;
    let status = response.status();
    let body = response
        .bytes()
        .await
        .map_err(|e| BenchError::Discovery(format!("{url}: {e}")))?;
    if !status.is_success() {
        return Err(BenchError::Discovery(format!("{url}: status {status}")));
    }
    serde_json::from_slice(&body).map_err(|e| BenchError::Discovery(format!("{url}: {e}")))
}

fn join(base: &Url, path: &str) -> Url {
    base.join(path).expect("relative api path")
}

/// Upper bound on graphs read to harvest search tokens.
const TOKEN_SAMPLE: usize = 64;

/// Picks a model and lists every URL of the class that should answer 200.
pub async fn discover(client: &Client, config: &BenchConfig) -> Result<(String, Vec<Url>), BenchError> {
    let base = base_url(&config.server)?;
    let service = config.class.service();
    let listing = get_json(client, join(&base, "api")).await?;
    let models = listing["data"]
        .as_array()
        .ok_or_else(|| BenchError::Discovery("model list has no data array".into()))?;
    let serves = |m: &&Value| {
        m["available_services"]
            .as_array()
            .is_some_and(|s| s.iter().any(|x| x == service))
    };
    let model = models
        .iter()
        .filter(|m| config.model.as_deref().is_none_or(|name| m["name"] == name))
        .find(serves)
        .ok_or(BenchError::NoModel(config.class))?;
    let name = model["name"].as_str().unwrap_or_default().to_string();
    let num_layers = model["num_layers"].as_u64().unwrap_or(0);

    let mut neurons = Vec::new();
    for layer in 0..num_layers {
        let summary = get_json(client, join(&base, &format!("api/{name}/{service}/{layer}"))).await?;
        let bitmap = summary["data"]["available"]
            .as_array()
            .ok_or_else(|| BenchError::Discovery(format!("layer {layer} summary has no availability")))?;
        neurons.extend(
            bitmap
                .iter()
                .enumerate()
                .filter(|(_, a)| a.as_bool() == Some(true))
                .map(|(n, _)| (layer, n)),
        );
    }
    let neuron_url = |(layer, neuron): &(u64, usize)| join(&base, &format!("api/{name}/{service}/{layer}/{neuron}"));

    let urls: Vec<Url> = match config.class {
        EndpointClass::Search => {
            let mut tokens = std::collections::BTreeSet::new();
            for path in neurons.iter().take(TOKEN_SAMPLE) {
                let graph = get_json(client, neuron_url(path)).await?;
                for node in graph["data"]["nodes"].as_array().into_iter().flatten() {
                    if let Some(token) = node["token"].as_str() {
                        let token = token.trim().to_lowercase();
                        if !token.is_empty() {
                            tokens.insert(token);
                        }
                    }
                }
            }
            let search = join(&base, &format!("api/{name}/neuron2graph-search"));
            tokens
                .iter()
                .flat_map(|t| ["any", "activating", "important"].map(|q| format!("{q}:{t}")))
                .map(|query| {
                    let mut url = search.clone();
                    url.query_pairs_mut().append_pair("query", &query);
                    url
                })
                .collect()
        }
        _ => neurons.iter().map(neuron_url).collect(),
    };
    if urls.is_empty() {
        return Err(BenchError::NoPaths {
            model: name,
            class: config.class,
        });
    }
    Ok((name, urls))
}

#[derive(Default)]
struct WorkerTally {
    latencies_ms: Vec<f64>,
    non_200: u64,
    transport_errors: u64,
}

pub async fn cmd_bench(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    let client = Client::new();
    let (model, urls) = discover(&client, config).await?;
    let urls = Arc::new(urls);
    let issued = Arc::new(AtomicU64::new(0));
    let budget = config.max_requests.unwrap_or(u64::MAX);

    let start = Instant::now();
    let deadline = start + config.duration;
    let workers: Vec<_> = (0..config.concurrency.max(1))
        .map(|worker| {
            let client = client.clone();
            let urls = Arc::clone(&urls);
            let issued = Arc::clone(&issued);
            let mut rng = StdRng::seed_from_u64(config.seed.wrapping_add(worker as u64));
            tokio::spawn(async move {
                let mut tally = WorkerTally::default();
                while Instant::now() < deadline && issued.fetch_add(1, Ordering::Relaxed) < budget {
                    let url = urls.choose(&mut rng).expect("non-empty").clone();
                    let sent = Instant::now();
                    let outcome = match client.get(url).send().await {
                        Ok(response) => {
                            let status = response.status();
                            response.bytes().await.map(|_| status)
                        }
                        Err(e) => Err(e),
                    };
                    tally.latencies_ms.push(sent.elapsed().as_secs_f64() * 1e3);
                    match outcome {
                        Ok(status) if status == reqwest::StatusCode::OK => {}
                        Ok(_) => tally.non_200 += 1,
                        Err(_) => tally.transport_errors += 1,
                    }
                }
                tally
            })
        })
        .collect();

    let mut latencies = Vec::new();
    let (mut non_200, mut transport_errors) = (0, 0);
    for worker in workers {
        let tally = worker.await.expect("bench worker panicked");
        latencies.extend(tally.latencies_ms);
        non_200 += tally.non_200;
        transport_errors += tally.transport_errors;
    }
    let wall = start.elapsed().as_secs_f64();
    let total = latencies.len() as u64;
    Ok(BenchReport {
        endpoint_class: config.class,
        model,
        concurrency: config.concurrency.max(1),
        distinct_paths: urls.len(),
        total_requests: total,
        non_200,
        transport_errors,
        wall_time_s: wall,
        requests_per_second: if wall > 0.0 { total as f64 / wall } else { 0.0 },
        latency_ms: percentiles(latencies),
    })
}
