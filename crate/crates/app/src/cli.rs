use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use tracing::{info, warn};

use scholarchat_core::classify::{KeywordProjectionEncoder, QueryEncoder, TopicContext};
use scholarchat_core::cluster::{ClusteringParams, IdfScope, RenameOutcome};
use scholarchat_core::eval::{
    classify_gold, cluster_report, run_script, ChatTarget, ConversationScript, GoldItem,
};
use scholarchat_core::ingest::{
    enrich_all, load_corpus, load_embeddings, load_taxonomy, EnrichStatus,
};
use scholarchat_core::snapshot::Snapshot;
use scholarchat_core::synth::{desk_fixture, write_desk_fixture, DESK_SEED};

use crate::client::HttpChatTarget;
use crate::config::AppConfig;
use crate::error::{require, AppError};
use crate::server::{self, AppState};

/// File written next to the snapshot by the cluster stage.
pub const CLUSTER_REPORT_FILE: &str = "clusters.report.json";

#[derive(Debug, Parser)]
#[command(
    name = "scholarchat",
    version,
    about = "Conversational exploration of a scholarly corpus"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the inputs and write a fresh snapshot.
    Ingest {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fill TLDRs, citation counts and references from the metadata
        /// provider.
        #[arg(long)]
        enrich: bool,
    },
    /// Build the cluster tree of every subtopic.
    Cluster {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Clustering parameters (TOML or JSON); the config is used otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Recompute cluster names, optionally asking the text generator.
    NameClusters {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        llm: bool,
        /// Seed for the sampled titles shown to the generator.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Scope::Siblings)]
        scope: Scope,
    },
    /// Label abstract sentences.
    Segment {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Use the configured sentence-label provider instead of the rules.
        #[arg(long)]
        provider: bool,
    },
    /// Serve the chat API.
    Serve {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Evaluation runs.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Write the synthetic 200-paper corpus.
    SynthFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DESK_SEED)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Score the classifier on a gold file (JSON list of {text, label}).
    Classify {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Structure statistics of the cluster trees.
    Clusters {
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Play conversation scripts in process or against a server.
    Script {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Base URL of a running server.
        #[arg(long)]
        server: Option<String>,
        #[arg(required = true)]
        scripts: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scope {
    Siblings,
    Topic,
}

/// Runs the command line and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::to_string(&e.report()).expect("report serializes")
            );
            e.exit_code()
        }
    }
}

/// Writes `value` to stdout. A closed pipe is not an error worth a panic.
fn print_json<T: Serialize>(value: &T) {
    let body = serde_json::to_string_pretty(value).expect("output serializes");
    let _ = writeln!(std::io::stdout(), "{body}");
}

fn pick(
    flag: Option<PathBuf>,
    configured: &Option<PathBuf>,
    what: &str,
) -> Result<PathBuf, AppError> {
    flag.or_else(|| configured.clone()).ok_or_else(|| {
        AppError::Config(format!(
            "no {what} path given on the command line or in data.{what}"
        ))
    })
}

fn load_snapshot(dir: &Path) -> Result<Snapshot, AppError> {
    require(dir)?;
    Ok(Snapshot::load(dir)?)
}

fn read_params(path: &Path) -> Result<ClusteringParams, AppError> {
    let text = fs::read_to_string(require(path)?).map_err(|e| AppError::input(path, e))?;
    let params: ClusteringParams = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| AppError::input(path, e))?
    } else {
        toml::from_str(&text).map_err(|e| AppError::input(path, e.message()))?
    };
    params.validate()?;
    Ok(params)
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    let config = AppConfig::load(cli.config.as_deref(), std::env::vars())?;
    let data = &config.data;
    match cli.command {
        Command::Ingest {
            corpus,
            taxonomy,
            embeddings,
            out,
            enrich,
        } => {
            let corpus = pick(corpus, &data.corpus, "corpus")?;
            let taxonomy = pick(taxonomy, &data.taxonomy, "taxonomy")?;
            let embeddings = pick(embeddings, &data.embeddings, "embeddings")?;
            let out = pick(out, &data.snapshot, "snapshot")?;
            ingest(&config, &corpus, &taxonomy, &embeddings, &out, enrich)
        }
        Command::Cluster { snapshot, params } => {
            let dir = pick(snapshot, &data.snapshot, "snapshot")?;
            let params = match params {
                Some(p) => read_params(&p)?,
                None => config.clustering.clone(),
            };
            cluster(&dir, &params)
        }
        Command::NameClusters {
            snapshot,
            llm,
            seed,
            scope,
        } => {
            let dir = pick(snapshot, &data.snapshot, "snapshot")?;
            name(&config, &dir, llm, seed, scope)
        }
        Command::Segment { snapshot, provider } => {
            let dir = pick(snapshot, &data.snapshot, "snapshot")?;
            let mut s = load_snapshot(&dir)?;
            let labeler = if provider {
                Some(config.providers.labeler()?)
            } else {
                None
            };
            s.segment(labeler.as_deref())?;
            s.save(&dir)?;
            let labelled: usize = s.segments.values().map(Vec::len).sum();
            print_json(&json!({ "abstracts": s.segments.len(), "sentences": labelled }));
            Ok(())
        }
        Command::Serve {
            snapshot,
            bind,
            port,
        } => {
            let dir = pick(snapshot, &data.snapshot, "snapshot")?;
            let mut config = config.clone();
            if let Some(b) = bind {
                config.server.bind = b;
            }
            if let Some(p) = port {
                config.server.port = p;
            }
            serve(config, &dir)
        }
        Command::Eval(EvalCommand::Classify { snapshot, gold }) => {
            let dir = pick(snapshot, &data.snapshot, "snapshot")?;
            eval_classify(&config, &dir, &gold)
        }
        Command::Eval(EvalCommand::Clusters { snapshot }) => {
            let dir = pick(snapshot, &data.snapshot, "snapshot")?;
            let s = load_snapshot(&dir)?;
            print_json(&cluster_report(&s, config.clustering.leaf_max)?);
            Ok(())
        }
        Command::Eval(EvalCommand::Script {
            snapshot,
            server,
            scripts,
        }) => eval_scripts(
            &config,
            snapshot.or_else(|| data.snapshot.clone()),
            server,
            &scripts,
        ),
        Command::SynthFixture { out, seed } => {
            let f = desk_fixture(seed);
            write_desk_fixture(&f, &out).map_err(|e| AppError::input(&out, e))?;
            print_json(&json!({
                "publications": f.records.len(),
                "topics": f.taxonomy.len(),
                "dim": f.embeddings.dim,
            }));
            Ok(())
        }
    }
}

fn ingest(
    config: &AppConfig,
    corpus: &Path,
    taxonomy: &Path,
    embeddings: &Path,
    out: &Path,
    enrich: bool,
) -> Result<(), AppError> {
    let mut records = load_corpus(require(corpus)?)?;
    let taxonomy = load_taxonomy(require(taxonomy)?)?;
    let embeddings = load_embeddings(require(embeddings)?)?;
    let mut enriched = 0;
    if enrich {
        let provider = config.providers.metadata()?;
        let results = enrich_all(&records, &provider, config.providers.enrich_max_in_flight);
        records = Vec::with_capacity(results.len());
        for (record, status) in results {
            match &status {
                EnrichStatus::Enriched => enriched += 1,
                EnrichStatus::Unavailable(why) => {
                    warn!(id = %record.id, %why, "enrichment skipped")
                }
                _ => {}
            }
            records.push(record);
        }
    }
    let snapshot = Snapshot::build(records, taxonomy, &embeddings)?;
    snapshot.save(out)?;
    info!(dir = %out.display(), "snapshot written");
    print_json(&json!({
        "publications": snapshot.records.len(),
        "topics": snapshot.taxonomy.len(),
        "dim": snapshot.dim(),
        "nodes": snapshot.graph.node_count(),
        "edges": snapshot.graph.edge_count(),
        "enriched": enriched,
    }));
    Ok(())
}

fn cluster(dir: &Path, params: &ClusteringParams) -> Result<(), AppError> {
    let mut s = load_snapshot(dir)?;
    s.cluster(params)?;
    s.save(dir)?;
    let report = cluster_report(&s, params.leaf_max)?;
    let path = dir.join(CLUSTER_REPORT_FILE);
    let mut body = serde_json::to_string_pretty(&report).expect("report serializes");
    body.push('\n');
    fs::write(&path, body).map_err(|e| AppError::input(&path, e))?;
    print_json(&report);
    Ok(())
}

fn name(
    config: &AppConfig,
    dir: &Path,
    llm: bool,
    seed: u64,
    scope: Scope,
) -> Result<(), AppError> {
    let mut s = load_snapshot(dir)?;
    s.name_clusters(match scope {
        Scope::Siblings => IdfScope::Siblings,
        Scope::Topic => IdfScope::Topic,
    })?;
    let mut renamed = 0;
    let mut kept = s.clusters.len();
    if llm {
        let generator = config.llm.generator()?;
        let outcomes = s.rename_with_llm(generator.as_ref(), seed)?;
        renamed = outcomes
            .iter()
            .filter(|(_, o)| matches!(o, RenameOutcome::Renamed(_)))
            .count();
        kept -= renamed;
    }
    s.save(dir)?;
    print_json(&json!({ "clusters": s.clusters.len(), "llm_renamed": renamed, "kept": kept }));
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime, AppError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| AppError::stage("serve", e))
}

fn serve(config: AppConfig, dir: &Path) -> Result<(), AppError> {
    let state = Arc::new(AppState::new(load_snapshot(dir)?, &config)?);
    runtime()?.block_on(async move {
        let addr = format!("{}:{}", config.server.bind, config.server.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| AppError::Config(format!("cannot bind {addr}: {e}")))?;
        let local = listener
            .local_addr()
            .map_err(|e| AppError::stage("serve", e))?;
        // The first stdout line tells callers (and tests using port 0) where
        // the service listens.
        println!("listening on http://{local}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        server::serve(listener, state, &config, shutdown).await
    })
}

fn eval_classify(config: &AppConfig, dir: &Path, gold: &Path) -> Result<(), AppError> {
    let text = fs::read_to_string(require(gold)?).map_err(|e| AppError::input(gold, e))?;
    let items: Vec<GoldItem> = serde_json::from_str(&text).map_err(|e| AppError::input(gold, e))?;
    let s = load_snapshot(dir)?;
    let keyword: KeywordProjectionEncoder;
    let remote = config.providers.encoder();
    let encoder: &dyn QueryEncoder = match &remote {
        Some(e) => e.as_ref(),
        None => {
            keyword = s.keyword_encoder();
            &keyword
        }
    };
    let provider = config.providers.topic_provider()?;
    let ctx = TopicContext {
        graph: &s.graph,
        index: &s.index,
        taxonomy: &s.taxonomy,
        encoder,
        provider: provider.as_deref(),
        config: &config.classifier,
    };
    let run = classify_gold(&items, &ctx)?;
    print_json(&run.report);
    Ok(())
}

fn eval_scripts(
    config: &AppConfig,
    snapshot: Option<PathBuf>,
    server: Option<String>,
    paths: &[PathBuf],
) -> Result<(), AppError> {
    let mut scripts = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(require(p)?).map_err(|e| AppError::input(p, e))?;
        scripts.push(ConversationScript::from_json(&text).map_err(|e| AppError::input(p, e))?);
    }
    let local;
    let target: &dyn ChatTarget = match server {
        Some(url) => {
            local = TargetBox::Http(HttpChatTarget::new(url));
            local.as_target()
        }
        None => {
            let dir = snapshot.ok_or_else(|| {
                AppError::Config("eval script needs --snapshot or --server".into())
            })?;
            let state = AppState::new(load_snapshot(&dir)?, config)?;
            local = TargetBox::Local(Box::new(state));
            local.as_target()
        }
    };
    let mut reports = Vec::with_capacity(scripts.len());
    for s in &scripts {
        reports.push(run_script(s, target)?);
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    print_json(&reports);
    if failed > 0 {
        return Err(AppError::Stage {
            stage: "eval",
            message: format!("{failed} of {} scripts failed", reports.len()),
        });
    }
    Ok(())
}

enum TargetBox {
    Http(HttpChatTarget),
    Local(Box<AppState>),
}

impl TargetBox {
    fn as_target(&self) -> &dyn ChatTarget {
        match self {
            TargetBox::Http(h) => h,
            TargetBox::Local(state) => &state.service,
        }
    }
}
