mod config;

use std::fmt;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use netmas::bus::ws;
use netmas::executor::DispatchMode;
use netmas::knowledge::{KnowledgeConfig, KnowledgeStore};
use netmas::orchestrator::{IntentOptions, SessionStatus};
use netmas::pipeline::{prepare, World, WorldConfig};
use netmas::planner::{parse_plan_text, TroubleshootingPlan};
use netmas::rca::render_html;
use netmas::scorer::{score_plan, FormatChecks, GroundingScore, RewardBreakdown, RewardConfig};
use netmas::telemetry::scenario::parse_scenario;
use netmas::telemetry::{FaultSpec, ScenarioKind, SimConfig, Simulator};
use netmas::time::SimClock;

use config::ConfigFile;

const LOG_ENV: &str = "NETMAS_LOG_LEVEL";

/// Network troubleshooting agents over simulated RAN and 5G core telemetry.
#[derive(Debug, Parser)]
#[command(name = "netmas", version)]
struct Cli {
    /// TOML file with defaults for the subcommand flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Chunk a corpus directory, extract triples and write the index file.
    Index {
        corpus_dir: PathBuf,
        /// Index file to write (default: <corpus_dir>/index.json).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        chunk_size: Option<usize>,
        #[arg(long)]
        overlap: Option<usize>,
    },
    /// Generate telemetry for a scenario file and print the dataset summary.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for counters.jsonl, alarms.jsonl, logs.jsonl and ground_truth.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate, detect and run one troubleshooting session end to end.
    Run {
        /// Scenario name (ran_input_power_failure, core_pdu_degradation) or scenario file.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        auto_approve: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Corpus directory to index instead of the built-in corpus.
        #[arg(long, conflicts_with = "index")]
        corpus: Option<PathBuf>,
        /// Prebuilt index file.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Attach the injection id to the report.
        #[arg(long)]
        ground_truth: bool,
        #[arg(long)]
        hitl_timeout_ms: Option<u64>,
        /// Dispatch step queries one at a time.
        #[arg(long)]
        sequential: bool,
        /// Also serve the bus WebSocket on this port while the session runs.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Score a plan against a corpus and print the reward breakdown.
    Score {
        /// Plan as JSON or as tagged plan text.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, conflicts_with = "index")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Intent text (default: the plan's intent_ref).
        #[arg(long)]
        intent: Option<String>,
    },
    /// Serve the bus WebSocket with all agents registered.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        auto_approve: bool,
        #[arg(long, conflicts_with = "index")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Start a session for the detected intent right away.
        #[arg(long)]
        start: bool,
        #[arg(long)]
        hitl_timeout_ms: Option<u64>,
    },
}

/// A runtime failure with the kind printed in the JSON error line.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

trait Kind<T> {
    fn kind(self, kind: &'static str) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Kind<T> for Result<T, E> {
    fn kind(self, kind: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind,
            error: e.into(),
        })
    }
}

fn fail(kind: &'static str, message: impl Into<String>) -> Failure {
    Failure {
        kind,
        error: anyhow::anyhow!(message.into()),
    }
}

fn usage_error(message: &str) -> ! {
    Cli::command()
        .error(ErrorKind::MissingRequiredArgument, message)
        .exit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(c) => c,
            Err(e) => return report_failure(fail("Config", format!("{}: {e:#}", path.display()))),
        },
        None => ConfigFile::default(),
    };
    init_logging(config.log_level.as_deref());

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return report_failure(Failure { kind: "Io", error: e.into() }),
    };
    match runtime.block_on(dispatch(cli.command, config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report_failure(f),
    }
}

fn report_failure(f: Failure) -> ExitCode {
    eprintln!(
        "{}",
        json!({ "error": { "kind": f.kind, "message": f.to_string() } })
    );
    ExitCode::from(1)
}

fn init_logging(config_level: Option<&str>) {
    let level = std::env::var(LOG_ENV)
        .ok()
        .or_else(|| config_level.map(str::to_string))
        .unwrap_or_else(|| "warn".to_string());
    let filter = tracing_subscriber::EnvFilter::try_new(&level)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

async fn dispatch(command: Command, config: ConfigFile) -> Result<(), Failure> {
    match command {
        Command::Index {
            corpus_dir,
            out,
            chunk_size,
            overlap,
        } => {
            let c = config.index;
            let mut kc = KnowledgeConfig::default();
            kc.chunk_size = chunk_size.or(c.chunk_size).unwrap_or(kc.chunk_size);
            kc.overlap = overlap.or(c.overlap).unwrap_or(kc.overlap);
            let out = out.or(c.out).unwrap_or_else(|| corpus_dir.join("index.json"));
            cmd_index(&corpus_dir, kc, &out)
        }
        Command::Simulate { scenario, seed, out } => {
            let c = config.simulate;
            cmd_simulate(&scenario, seed.or(c.seed), out.or(c.out).as_deref())
        }
        Command::Run {
            scenario,
            seed,
            auto_approve,
            out,
            corpus,
            index,
            ground_truth,
            hitl_timeout_ms,
            sequential,
            port,
        } => {
            let c = config.run;
            let Some(scenario) = scenario.or(c.scenario) else {
                usage_error("--scenario is required (flag or [run] scenario in the config file)")
            };
            let Some(out) = out.or(c.out) else {
                usage_error("--out is required (flag or [run] out in the config file)")
            };
            let args = RunArgs {
                scenario,
                seed: seed.or(c.seed),
                auto_approve: auto_approve || c.auto_approve.unwrap_or(false),
                out,
                knowledge: KnowledgeSource::pick(corpus.or(c.corpus), index.or(c.index)),
                ground_truth: ground_truth || c.ground_truth.unwrap_or(false),
                hitl_timeout_ms: hitl_timeout_ms.or(c.hitl_timeout_ms),
                sequential: sequential || c.sequential.unwrap_or(false),
                port: port.or(c.port),
            };
            cmd_run(args).await
        }
        Command::Score {
            plan,
            corpus,
            index,
            intent,
        } => {
            let c = config.score;
            let source = match KnowledgeSource::pick(corpus.or(c.corpus), index.or(c.index)) {
                KnowledgeSource::Embedded => {
                    usage_error("--corpus or --index is required (flag or [score] table)")
                }
                s => s,
            };
            cmd_score(&plan, source, intent.or(c.intent))
        }
        Command::Serve {
            host,
            port,
            scenario,
            seed,
            auto_approve,
            corpus,
            index,
            start,
            hitl_timeout_ms,
        } => {
            let c = config.serve;
            let args = ServeArgs {
                host: host.or(c.host).unwrap_or_else(|| "127.0.0.1".to_string()),
                port: port.or(c.port).unwrap_or(8700),
                scenario: scenario
                    .or(c.scenario)
                    .unwrap_or_else(|| ScenarioKind::RanInputPowerFailure.as_str().to_string()),
                seed: seed.or(c.seed),
                auto_approve: auto_approve || c.auto_approve.unwrap_or(false),
                knowledge: KnowledgeSource::pick(corpus.or(c.corpus), index.or(c.index)),
                start: start || c.start.unwrap_or(false),
                hitl_timeout_ms: hitl_timeout_ms.or(c.hitl_timeout_ms),
            };
            cmd_serve(args).await
        }
    }
}

enum KnowledgeSource {
    Embedded,
    Corpus(PathBuf),
    Index(PathBuf),
}

impl KnowledgeSource {
    fn pick(corpus: Option<PathBuf>, index: Option<PathBuf>) -> Self {
        match (index, corpus) {
            (Some(i), _) => Self::Index(i),
            (None, Some(c)) => Self::Corpus(c),
            (None, None) => Self::Embedded,
        }
    }

    fn load(&self) -> Result<KnowledgeStore, Failure> {
        match self {
            Self::Embedded => Ok(KnowledgeStore::embedded()),
            Self::Corpus(dir) => KnowledgeStore::from_dir(dir, KnowledgeConfig::default())
                .with_context(|| dir.display().to_string())
                .kind("Knowledge"),
            Self::Index(path) => KnowledgeStore::load(path)
                .with_context(|| path.display().to_string())
                .kind("Knowledge"),
        }
    }
}

/// Writes one JSON document to stdout. A closed pipe is not an error.
fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).kind("Serialize")?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure {
            kind: "Io",
            error: e.into(),
        }),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .with_context(|| path.display().to_string())
        .kind("Io")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).kind("Serialize")?;
    text.push('\n');
    write_file(path, &text)
}

fn cmd_index(corpus_dir: &Path, config: KnowledgeConfig, out: &Path) -> Result<(), Failure> {
    let store = KnowledgeSource::Corpus(corpus_dir.to_path_buf()).load_with(config)?;
    store
        .save(out)
        .with_context(|| out.display().to_string())
        .kind("Io")?;
    tracing::info!(path = %out.display(), "index written");
    print_json(&json!({
        "index": out,
        "chunks": store.chunks().len(),
        "triples": store.triples().len(),
        "graph_nodes": store.graph().nodes().len(),
        "patterns": store.patterns().len(),
        "collections": store.collections(),
    }))
}

impl KnowledgeSource {
    fn load_with(&self, config: KnowledgeConfig) -> Result<KnowledgeStore, Failure> {
        match self {
            Self::Corpus(dir) => KnowledgeStore::from_dir(dir, config)
                .with_context(|| dir.display().to_string())
                .kind("Knowledge"),
            other => other.load(),
        }
    }
}

fn read_spec(path: &Path) -> Result<FaultSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| path.display().to_string())
        .kind("Io")?;
    parse_scenario(&text)
        .with_context(|| path.display().to_string())
        .kind("Scenario")
}

fn cmd_simulate(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let mut spec = read_spec(path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let mut sim = Simulator::new(SimConfig::default());
    let summary = sim.generate_scenario(&spec).kind("Telemetry")?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .with_context(|| dir.display().to_string())
            .kind("Io")?;
        sim.store().export_jsonl(dir).kind("Telemetry")?;
        write_json(&dir.join("ground_truth.json"), &sim.ground_truth())?;
        write_json(&dir.join("dataset.json"), &summary)?;
    }
    print_json(&json!({ "dataset": summary, "ground_truth": sim.ground_truth() }))
}

/// A scenario name selects the reference fault; anything else is read as a
/// scenario file.
fn resolve_spec(scenario: &str, seed: Option<u64>) -> Result<FaultSpec, Failure> {
    let mut spec = match ScenarioKind::parse(scenario) {
        Some(kind) => FaultSpec::reference(kind, 42),
        None => read_spec(Path::new(scenario))?,
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    Ok(spec)
}

struct RunArgs {
    scenario: String,
    seed: Option<u64>,
    auto_approve: bool,
    out: PathBuf,
    knowledge: KnowledgeSource,
    ground_truth: bool,
    hitl_timeout_ms: Option<u64>,
    sequential: bool,
    port: Option<u16>,
}

fn world_config(hitl_timeout_ms: Option<u64>, sequential: bool) -> WorldConfig {
    let mut config = WorldConfig::default();
    if let Some(ms) = hitl_timeout_ms {
        config.orchestrator.hitl_timeout_ms = ms;
    }
    if sequential {
        config.orchestrator.dispatch = DispatchMode::Sequential;
    }
    config
}

async fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let spec = resolve_spec(&args.scenario, args.seed)?;
    let knowledge = Arc::new(args.knowledge.load()?);
    let prepared = prepare(spec).kind("Pipeline")?;
    let world = World::new(
        Arc::new(prepared.store),
        prepared.topology,
        knowledge,
        SimClock::starting_at(prepared.start_at),
        world_config(args.hitl_timeout_ms, args.sequential),
    );
    if let Some(port) = args.port {
        spawn_server(world.bus.clone(), SocketAddr::from(([127, 0, 0, 1], port))).await?;
    }

    let session = world
        .orchestrator
        .handle_intent(
            prepared.prompt.clone(),
            IntentOptions {
                auto_approve: Some(args.auto_approve),
                backend: None,
            },
        )
        .await
        .kind("Orchestrator")?;
    let mut report = session.report.clone();
    if args.ground_truth {
        if let Some(r) = report.as_mut() {
            r.ground_truth_ref = prepared.ground_truth.first().map(|g| g.injection_id.clone());
        }
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| args.out.display().to_string())
        .kind("Io")?;
    write_json(&args.out.join("session.json"), &session)?;
    write_json(
        &args.out.join("dataset.json"),
        &json!({
            "spec": prepared.spec,
            "dataset": prepared.dataset,
            "ground_truth": prepared.ground_truth,
            "prompt": prepared.prompt,
        }),
    )?;
    let Some(report) = report else {
        return Err(fail(
            "SessionFailed",
            format!(
                "{} ended {:?} without a report: {}",
                session.session_id,
                session.status,
                session.error.unwrap_or_default()
            ),
        ));
    };
    write_json(&args.out.join("report.json"), &report)?;
    let html = render_html(&report);
    write_file(&args.out.join("report.html"), &html)?;
    let named = format!("report-{}-{}.html", report.run_id, report.generated_at);
    write_file(&args.out.join(&named), &html)?;

    print_json(&json!({
        "session_id": session.session_id,
        "status": session.status,
        "iterations": session.iteration_count,
        "variant": report.variant,
        "top_candidate": report.top_candidate().map(|c| json!({
            "label": c.label,
            "confidence": c.confidence,
            "nodes": c.nodes(),
        })),
        "out": args.out,
    }))?;
    if session.status == SessionStatus::Completed {
        Ok(())
    } else {
        Err(fail(
            "SessionFailed",
            format!("{} ended {:?}", session.session_id, session.status),
        ))
    }
}

#[derive(Serialize)]
struct ScoreOutput {
    #[serde(flatten)]
    breakdown: RewardBreakdown,
    passes_gate: bool,
    format_checks: FormatChecks,
    grounding: GroundingScore,
}

fn read_plan(path: &Path) -> Result<TroubleshootingPlan, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| path.display().to_string())
        .kind("Io")?;
    if text.trim_start().starts_with('{') {
        serde_json::from_str(&text)
            .with_context(|| path.display().to_string())
            .kind("Plan")
    } else {
        parse_plan_text(&text)
            .with_context(|| path.display().to_string())
            .kind("Plan")
    }
}

fn cmd_score(plan: &Path, source: KnowledgeSource, intent: Option<String>) -> Result<(), Failure> {
    let plan = read_plan(plan)?;
    let store = source.load()?;
    let cited: Vec<_> = plan
        .source_chunks
        .iter()
        .filter_map(|id| store.chunk(id).cloned())
        .collect();
    let chunks = if cited.is_empty() {
        store.chunks().to_vec()
    } else {
        cited
    };
    let intent = intent.unwrap_or_else(|| plan.intent_ref.clone());
    let score = score_plan(
        &plan,
        &intent,
        &chunks,
        store.dictionary(),
        &RewardConfig::default(),
    )
    .kind("Score")?;
    print_json(&ScoreOutput {
        breakdown: score.breakdown,
        passes_gate: score.passes_gate,
        format_checks: score.format,
        grounding: score.grounding,
    })
}

struct ServeArgs {
    host: String,
    port: u16,
    scenario: String,
    seed: Option<u64>,
    auto_approve: bool,
    knowledge: KnowledgeSource,
    start: bool,
    hitl_timeout_ms: Option<u64>,
}

/// Binds the bus WebSocket and serves it on a background task.
async fn spawn_server(bus: netmas::bus::AgentBus, addr: SocketAddr) -> Result<SocketAddr, Failure> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| addr.to_string())
        .kind("Io")?;
    let bound = listener.local_addr().kind("Io")?;
    tokio::spawn(async move {
        if let Err(e) = ws::serve_on(listener, bus).await {
            tracing::error!(error = %e, "bus endpoint stopped");
        }
    });
    tracing::info!(%bound, "bus endpoint listening");
    Ok(bound)
}

async fn cmd_serve(args: ServeArgs) -> Result<(), Failure> {
    let spec = resolve_spec(&args.scenario, args.seed)?;
    let knowledge = Arc::new(args.knowledge.load()?);
    let prepared = prepare(spec).kind("Pipeline")?;
    let mut config = world_config(args.hitl_timeout_ms, false);
    config.orchestrator.auto_approve = args.auto_approve;
    let world = World::new(
        Arc::new(prepared.store),
        prepared.topology,
        knowledge,
        SimClock::starting_at(prepared.start_at),
        config,
    );
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .kind("Config")?;
    let bound = spawn_server(world.bus.clone(), addr).await?;
    let session = if args.start {
        let s = world
            .orchestrator
            .start_intent(
                prepared.prompt.clone(),
                IntentOptions {
                    auto_approve: Some(args.auto_approve),
                    backend: None,
                },
            )
            .kind("Orchestrator")?;
        Some(s.session_id)
    } else {
        None
    };
    print_json(&json!({
        "listening": format!("ws://{bound}/bus"),
        "prompt": prepared.prompt,
        "session_id": session,
    }))?;
    tokio::signal::ctrl_c().await.kind("Io")?;
    Ok(())
}
