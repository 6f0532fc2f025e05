//! Best-effort download of public upstream data into the ingestion layout.
//!
//! Fetching is sequential with a fixed delay between requests. Existing
//! output files are never requested again or overwritten, so an interrupted
//! run can simply be restarted. Failures are collected in the report and do
//! not stop the run.

use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use neuronhub_core::explainer::{validate_explanation, ExplanationRecord};
use neuronhub_core::layout::record_path;
use neuronhub_core::neuroscope::{validate_snippets, NeuronSnippets, SnippetRecord, MAX_SNIPPETS};
use neuronhub_core::store::RecordKey;
use neuronhub_core::{Explanation, ServiceKind, Snippets};
use serde::Serialize;
use serde_json::Value;

pub const NEUROSCOPE_URL: &str = "https://neuroscope.io/{model}/{layer}/{neuron}.html";
pub const EXPLAINER_URL: &str =
    "https://openaipublic.blob.core.windows.net/neuron-explainer/data/explanations/{layer}/{neuron}.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    NeuroscopeWeb,
    ExplainerPublic,
}

impl Source {
    pub fn service(self) -> ServiceKind {
        match self {
            Source::NeuroscopeWeb => ServiceKind::Neuroscope,
            Source::ExplainerPublic => ServiceKind::NeuronExplainer,
        }
    }

    pub fn default_url_template(self) -> &'static str {
        match self {
            Source::NeuroscopeWeb => NEUROSCOPE_URL,
            Source::ExplainerPublic => EXPLAINER_URL,
        }
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neuroscope-web" => Ok(Source::NeuroscopeWeb),
            "explainer-public" => Ok(Source::ExplainerPublic),
            other => Err(format!("unknown source {other:?}; expected neuroscope-web or explainer-public")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub source: Source,
    pub model: String,
    pub layers: Range<u32>,
    pub neurons: Range<u32>,
    pub out_dir: PathBuf,
    pub url_template: String,
    pub delay: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FetchFailure {
    FetchFailed { url: String, status: Option<u16>, reason: String },
    ParseFailed { url: String, reason: String },
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FetchReport {
    pub requested: usize,
    pub written: usize,
    pub skipped_existing: usize,
    pub failed: Vec<FetchFailure>,
}

pub fn expand_template(template: &str, model: &str, layer: u32, neuron: u32) -> String {
    template
        .replace("{model}", model)
        .replace("{layer}", &layer.to_string())
        .replace("{neuron}", &neuron.to_string())
}

/// Extracts every `ColoredTokens` render call's `{"tokens", "values"}` props
/// from a neuroscope-style neuron page, in page order, and returns them as a
/// sorted, validated snippet list.
pub fn parse_neuroscope_page(html: &str) -> Result<Snippets, String> {
    const MARKER: &str = "ColoredTokens";
    let mut texts = Vec::new();
    let mut rest = html;
    while let Some(pos) = rest.find(MARKER) {
        rest = &rest[pos + MARKER.len()..];
        // Skip the import statement and any other mention without props.
        let Some(open) = rest.find(['{', '<', ')']) else { break };
        if !rest[open..].starts_with('{') {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&rest[open..]).into_iter::<Value>();
        let props = match stream.next() {
            Some(Ok(v)) => v,
            Some(Err(e)) => return Err(format!("text {}: invalid props: {e}", texts.len())),
            None => break,
        };
        rest = &rest[open + stream.byte_offset()..];
        texts.push(props_to_record(&props).map_err(|e| format!("text {}: {e}", texts.len()))?);
    }
    if texts.is_empty() {
        return Err("no ColoredTokens blocks found".into());
    }
    texts.sort_by(|a, b| b.max_activation.total_cmp(&a.max_activation));
    texts.truncate(MAX_SNIPPETS);
    validate_snippets(NeuronSnippets { texts }).map_err(|e| e.to_string())
}

fn props_to_record(props: &Value) -> Result<SnippetRecord<f64>, String> {
    let tokens: Vec<String> = props["tokens"]
        .as_array()
        .ok_or("missing tokens")?
        .iter()
        .map(|t| t.as_str().map(str::to_owned).ok_or("non-string token"))
        .collect::<Result<_, _>>()?;
    let values = props
        .get("values")
        .or_else(|| props.get("activations"))
        .and_then(Value::as_array)
        .ok_or("missing values")?;
    let activations: Vec<f64> = values
        .iter()
        .map(|v| v.as_f64().ok_or("non-numeric activation"))
        .collect::<Result<_, _>>()?;
    SnippetRecord::from_activations(tokens, activations).ok_or_else(|| "tokens and values differ in length or are empty".into())
}

/// Reads the first scored explanation of a public explanation record.
///
/// Accepts either a flat `{"explanation"|"text", "score"}` object or the
/// `scored_explanation_results[0]` layout with
/// `scored_simulation.ev_correlation_score`. Scores outside `[0, 1]` are
/// reported, not clamped.
pub fn parse_explainer_record(body: &str) -> Result<Explanation, String> {
    let line = body.lines().find(|l| !l.trim().is_empty()).ok_or("empty body")?;
    let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let entry = v
        .get("scored_explanation_results")
        .and_then(|r| r.get(0))
        .unwrap_or(&v);
    let text = entry
        .get("explanation")
        .or_else(|| entry.get("text"))
        .and_then(Value::as_str)
        .ok_or("missing explanation text")?;
    let score = entry
        .get("scored_simulation")
        .and_then(|s| s.get("ev_correlation_score"))
        .or_else(|| entry.get("score"))
        .and_then(Value::as_f64)
        .ok_or("missing score")?;
    validate_explanation(ExplanationRecord {
        text: text.trim().to_string(),
        score,
    })
    .map_err(|e| e.to_string())
}

fn write_new(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let part = path.with_extension("json.part");
    std::fs::write(&part, bytes)?;
    std::fs::rename(&part, path)
}

pub async fn cmd_fetch(client: &reqwest::Client, config: &FetchConfig) -> FetchReport {
    let mut report = FetchReport::default();
    let service = config.source.service();
    let mut first = true;
    for layer in config.layers.clone() {
        for neuron in config.neurons.clone() {
            let key = RecordKey::new(config.model.clone(), service, layer, neuron);
            let path = record_path(&config.out_dir, &key);
            if path.exists() {
                report.skipped_existing += 1;
                continue;
            }
            if !first {
                tokio::time::sleep(config.delay).await;
            }
            first = false;

            let url = expand_template(&config.url_template, &config.model, layer, neuron);
            report.requested += 1;
            match fetch_one(client, &url, config.source).await {
                Ok(bytes) => match write_new(&path, &bytes) {
                    Ok(()) => report.written += 1,
                    Err(e) => report.failed.push(FetchFailure::FetchFailed {
                        url,
                        status: None,
                        reason: format!("writing {}: {e}", path.display()),
                    }),
                },
                Err(failure) => {
                    tracing::warn!(?failure, "fetch failed");
                    report.failed.push(failure);
                }
            }
        }
    }
    report
}

async fn fetch_one(client: &reqwest::Client, url: &str, source: Source) -> Result<Vec<u8>, FetchFailure> {
    let fetch_failed = |status: Option<u16>, reason: String| FetchFailure::FetchFailed {
        url: url.to_string(),
        status,
        reason,
    };
    let response = client
        .get(url)
        .send()
        .await
        .map_err(|e| fetch_failed(None, e.to_string()))?;
    let status = response.status();
    if !status.is_success() {
        return Err(fetch_failed(Some(status.as_u16()), status.to_string()));
    }
    let body = response
        .text()
        .await
        .map_err(|e| fetch_failed(Some(status.as_u16()), e.to_string()))?;
    let parse_failed = |reason: String| FetchFailure::ParseFailed {
        url: url.to_string(),
        reason,
    };
    let mut bytes = match source {
        Source::NeuroscopeWeb => serde_json::to_vec_pretty(&parse_neuroscope_page(&body).map_err(parse_failed)?),
        Source::ExplainerPublic => serde_json::to_vec_pretty(&parse_explainer_record(&body).map_err(parse_failed)?),
    }
    .expect("record serializes");
    bytes.push(b'\n');
    Ok(bytes)
}
