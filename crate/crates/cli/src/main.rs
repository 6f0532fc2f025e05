use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use neuronhub_cli::bench::{cmd_bench, BenchConfig, EndpointClass};
use neuronhub_cli::fetch::{cmd_fetch, FetchConfig, Source};
use neuronhub_cli::ingest::{cmd_ingest, failure_report};
use neuronhub_cli::parse_range;
use neuronhub_core::fixture::{demo_specs, write_tree, FixtureSpec, MODEL_FILE};
use neuronhub_core::n2g::{DEFAULT_IMPORTANCE_FLOOR, DEFAULT_SIMILARITY_K, DEFAULT_SIMILARITY_THRESHOLD};
use neuronhub_core::store::StoreParams;
use neuronhub_core::{ModelMetadata, ServiceKind, ServiceSet};
use neuronhub_server::{serve, shutdown_signal, ServeConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "neuronhub", version, about = "Neuron interpretability data service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a store file from a data directory.
    Ingest(IngestArgs),
    /// Write a deterministic synthetic data directory.
    Fixture(FixtureArgs),
    /// Download public upstream records into a data directory.
    Fetch(FetchArgs),
    /// Load-test a running server.
    Bench(BenchArgs),
    /// Serve a store over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IMPORTANCE_FLOOR)]
    importance_floor: f64,
    #[arg(long, default_value_t = DEFAULT_SIMILARITY_K as u32)]
    similarity_k: u32,
    #[arg(long, default_value_t = DEFAULT_SIMILARITY_THRESHOLD)]
    similarity_threshold: f64,
    /// Creation time recorded in the store, seconds since the epoch.
    #[arg(long, env = "SOURCE_DATE_EPOCH", default_value_t = 0)]
    created_at: u64,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
    /// Write the bundled demo models.
    #[arg(long, conflicts_with_all = ["spec", "model"])]
    demo: bool,
    /// JSON fixture spec.
    #[arg(long, conflicts_with = "model")]
    spec: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 2)]
    layers: u32,
    #[arg(long, default_value_t = 8)]
    neurons: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated data services.
    #[arg(long, value_delimiter = ',')]
    services: Vec<ServiceKind>,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long)]
    source: Source,
    #[arg(long)]
    model: String,
    /// `N` or `A..B`.
    #[arg(long, value_parser = parse_range)]
    layers: std::ops::Range<u32>,
    #[arg(long, value_parser = parse_range)]
    neurons: std::ops::Range<u32>,
    #[arg(long)]
    out: PathBuf,
    /// URL with `{model}`, `{layer}` and `{neuron}` placeholders.
    #[arg(long)]
    url_template: Option<String>,
    #[arg(long, default_value_t = 500)]
    delay_ms: u64,
    /// With `--neurons-per-layer`, writes `model.json` if it is missing.
    #[arg(long, requires = "neurons_per_layer")]
    num_layers: Option<u32>,
    #[arg(long, requires = "num_layers")]
    neurons_per_layer: Option<u32>,
    #[arg(long, default_value = "unknown")]
    activation_function: String,
    #[arg(long, default_value = "unknown")]
    dataset: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    server: String,
    #[arg(long)]
    class: EndpointClass,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 8)]
    concurrency: usize,
    #[arg(long, default_value_t = 30.0)]
    duration_s: f64,
    /// Stop after this many requests.
    #[arg(long)]
    requests: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit nonzero below this rate.
    #[arg(long)]
    min_rps: Option<f64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Overrides the port of `--bind`.
    #[arg(long, env = "NEURONHUB_PORT")]
    port: Option<u16>,
    /// Explorer build served under `/viz`.
    #[arg(long)]
    assets: Option<PathBuf>,
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn ingest(args: IngestArgs) -> anyhow::Result<ExitCode> {
    let params = StoreParams {
        importance_floor: args.importance_floor,
        similarity_k: args.similarity_k,
        similarity_threshold: args.similarity_threshold,
    };
    match cmd_ingest(&args.data_dir, &args.store, params, args.created_at) {
        Ok(outcome) => {
            for model in &outcome.models {
                for warning in &model.warnings {
                    eprintln!("warning: {}: {warning}", model.model);
                }
            }
            eprintln!(
                "ingested {} records from {} models into {}",
                outcome.records,
                outcome.models.len(),
                outcome.store.display()
            );
            print_json(&outcome);
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            let report = failure_report(&err, &args.data_dir);
            eprintln!("ingest failed: {err}");
            for rejected in report["rejected"].as_array().into_iter().flatten() {
                eprintln!("  {}: {}", rejected["path"].as_str().unwrap_or(""), rejected["reason"].as_str().unwrap_or(""));
            }
            print_json(&report);
            Ok(ExitCode::FAILURE)
        }
    }
}

fn fixture(args: FixtureArgs) -> anyhow::Result<ExitCode> {
    let specs = if args.demo {
        demo_specs()
    } else if let Some(path) = &args.spec {
        let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        vec![serde_json::from_slice::<FixtureSpec>(&raw).with_context(|| format!("parsing {}", path.display()))?]
    } else if let Some(model) = &args.model {
        let mut spec = FixtureSpec::new(model.clone(), args.layers, args.neurons, args.seed);
        if !args.services.is_empty() {
            spec.services = args.services.iter().copied().collect::<ServiceSet>();
        }
        vec![spec]
    } else {
        bail!("one of --demo, --spec or --model is required");
    };

    let mut manifests = Vec::new();
    for spec in &specs {
        let manifest = write_tree(spec, &args.out).with_context(|| format!("writing fixture {}", spec.model))?;
        eprintln!("wrote {} ({} neurons) under {}", spec.model, manifest.neurons.len(), args.out.display());
        manifests.push(manifest);
    }
    print_json(&manifests);
    Ok(ExitCode::SUCCESS)
}

fn write_model_file(dir: &Path, meta: &ModelMetadata) -> anyhow::Result<()> {
    let path = dir.join(MODEL_FILE);
    if path.exists() {
        return Ok(());
    }
    std::fs::create_dir_all(dir)?;
    let mut bytes = serde_json::to_vec_pretty(meta)?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

async fn fetch(args: FetchArgs) -> anyhow::Result<ExitCode> {
    if let (Some(num_layers), Some(neurons_per_layer)) = (args.num_layers, args.neurons_per_layer) {
        let meta = ModelMetadata {
            name: args.model.clone(),
            num_layers,
            neurons_per_layer,
            activation_function: args.activation_function.clone(),
            dataset: args.dataset.clone(),
            available_services: ServiceSet::new(),
        };
        meta.check().context("invalid model metadata")?;
        write_model_file(&args.out.join(&args.model), &meta)?;
    }
    let config = FetchConfig {
        source: args.source,
        model: args.model,
        layers: args.layers,
        neurons: args.neurons,
        out_dir: args.out,
        url_template: args
            .url_template
            .unwrap_or_else(|| args.source.default_url_template().to_string()),
        delay: Duration::from_millis(args.delay_ms),
    };
    let client = reqwest::Client::builder()
        .user_agent(concat!("neuronhub/", env!("CARGO_PKG_VERSION")))
        .build()?;
    let report = cmd_fetch(&client, &config).await;
    eprintln!(
        "fetched {} of {} requested, {} already present, {} failed",
        report.written,
        report.requested,
        report.skipped_existing,
        report.failed.len()
    );
    print_json(&report);
    Ok(if report.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

async fn bench(args: BenchArgs) -> anyhow::Result<ExitCode> {
    let config = BenchConfig {
        server: args.server,
        class: args.class,
        model: args.model,
        concurrency: args.concurrency,
        duration: Duration::try_from_secs_f64(args.duration_s).context("invalid --duration-s")?,
        max_requests: args.requests,
        seed: args.seed,
    };
    let report = cmd_bench(&config).await?;
    eprintln!(
        "{} on {}: {} requests in {:.2}s = {:.1} req/s, p50 {:.2}ms p95 {:.2}ms p99 {:.2}ms, {} non-200, {} transport errors",
        report.endpoint_class,
        report.model,
        report.total_requests,
        report.wall_time_s,
        report.requests_per_second,
        report.latency_ms.p50,
        report.latency_ms.p95,
        report.latency_ms.p99,
        report.non_200,
        report.transport_errors
    );
    print_json(&report);
    if report.meets(args.min_rps) {
        Ok(ExitCode::SUCCESS)
    } else {
        if let Some(floor) = args.min_rps {
            eprintln!("threshold not met: need {floor} req/s with every response 200");
        }
        Ok(ExitCode::FAILURE)
    }
}

async fn serve_cmd(args: ServeArgs) -> anyhow::Result<ExitCode> {
    let mut bind = args.bind;
    if let Some(port) = args.port {
        bind.set_port(port);
    }
    let config = ServeConfig {
        bind,
        store: args.store,
        assets: args.assets,
    };
    serve(config, shutdown_signal()).await?;
    Ok(ExitCode::SUCCESS)
}

fn init_logging(to_stdout: bool) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    let builder = tracing_subscriber::fmt().with_env_filter(filter);
    if to_stdout {
        builder.with_writer(std::io::stdout).init();
    } else {
        builder.with_writer(std::io::stderr).init();
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(matches!(cli.command, Command::Serve(_)));
    let result = match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Fixture(args) => fixture(args),
        Command::Fetch(args) => fetch(args).await,
        Command::Bench(args) => bench(args).await,
        Command::Serve(args) => serve_cmd(args).await,
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
