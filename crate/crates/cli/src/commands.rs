use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use eicharvest::corpus::{ingest_corpus, load_index, save_index_dir, DEFAULT_SNIPPET_WINDOW};
use eicharvest::disambig::KnowledgeBase;
use eicharvest::sim::{
    audit_workload_entry, evaluate_run_dir, generate_workload, load_catalog, run_experiment, save_workload,
    synth_corpus, SimConfig, SynthParams, WorkloadCriteria,
};
use eicharvest::SessionOptions;

use crate::api::{self, ApiConfig, AppState, BusyPolicy};

#[derive(Debug, Parser)]
#[command(name = "eicharvest", version, about = "Harvest keyphrases for new knowledge-base entities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index an annotated JSONL corpus into a directory.
    Ingest {
        corpus: PathBuf,
        index_dir: PathBuf,
    },
    /// Generate a synthetic annotated collection.
    Synth(SynthArgs),
    /// Select query entities from an index and its entity catalog.
    Workload(WorkloadArgs),
    /// Run the simulated-user benchmark described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-score the saved representations of a run against a knowledge base.
    EvalDisambig {
        results: PathBuf,
        kb: PathBuf,
        /// Write per-checkpoint accuracies here instead of only printing means.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve interactive sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub entities: usize,
    #[arg(long, default_value_t = 40)]
    pub docs_per_entity: usize,
    #[arg(long, default_value_t = 80)]
    pub kps_per_entity: usize,
    #[arg(long, default_value_t = 10)]
    pub confusable_pairs: usize,
}

#[derive(Debug, Args)]
pub struct WorkloadArgs {
    /// Index directory or corpus file.
    pub index: PathBuf,
    /// Entity catalog (JSONL).
    pub annotations: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub max_df: usize,
    #[arg(long, default_value_t = 50)]
    pub min_kps: usize,
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    /// Keep entities whose names are not shared with any other entity.
    #[arg(long)]
    pub allow_unambiguous: bool,
    /// Output file; defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Index directory or corpus file.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, env = "EICHARVEST_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Comma-separated browser origins allowed by CORS; any when unset.
    #[arg(long, env = "EICHARVEST_UI_ORIGIN", value_delimiter = ',')]
    pub ui_origin: Vec<String>,
    #[arg(long, value_enum, default_value_t = BusyPolicy::Wait)]
    pub busy: BusyPolicy,
    /// Directory for JSON snapshots of finished sessions.
    #[arg(long)]
    pub snapshots: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SNIPPET_WINDOW)]
    pub snippet_window: usize,
}

/// Writes to stdout; a reader that went away early is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { corpus, index_dir } => ingest(&corpus, &index_dir),
        Command::Synth(args) => synth(&args),
        Command::Workload(args) => workload(&args),
        Command::Simulate { config, out } => simulate(&config, out),
        Command::EvalDisambig { results, kb, out } => eval_disambig(&results, &kb, out.as_deref()),
        Command::Serve(args) => serve(&args),
    }
}

fn ingest(corpus: &Path, index_dir: &Path) -> Result<()> {
    let index = ingest_corpus(corpus).with_context(|| format!("ingesting {}", corpus.display()))?;
    save_index_dir(&index, index_dir)?;
    emit(&format!(
        "indexed {} documents ({} tokens) into {}\n",
        index.len(),
        index.stats().total_tokens,
        index_dir.display()
    ))
}

fn synth(args: &SynthArgs) -> Result<()> {
    let corpus = synth_corpus(SynthParams {
        seed: args.seed,
        n_entities: args.entities,
        docs_per_entity: args.docs_per_entity,
        kps_per_entity: args.kps_per_entity,
        confusable_pairs: args.confusable_pairs,
    })?;
    corpus.write_to(&args.out)?;
    emit(&format!(
        "wrote {} documents, {} entities, {} kb entries to {}\n",
        corpus.documents.len(),
        corpus.catalog.len(),
        corpus.kb.len(),
        args.out.display()
    ))
}

fn workload(args: &WorkloadArgs) -> Result<()> {
    let index = load_index(&args.index).with_context(|| format!("loading {}", args.index.display()))?;
    let catalog = load_catalog(&args.annotations).with_context(|| format!("loading {}", args.annotations.display()))?;
    let criteria = WorkloadCriteria {
        max_doc_freq: args.max_df,
        min_keyphrases: args.min_kps,
        require_ambiguous: !args.allow_unambiguous,
        seed_count: args.seeds,
    };
    let entries = generate_workload(&index, &catalog, &criteria);
    for e in &entries {
        let violations = audit_workload_entry(&index, &catalog, e, &criteria);
        if !violations.is_empty() {
            bail!("workload entry {} fails its own filters: {}", e.entity, violations.join("; "));
        }
    }
    match &args.out {
        Some(path) => {
            save_workload(path, &entries)?;
            eprintln!("{} queries written to {}", entries.len(), path.display());
        }
        None => {
            let mut text = String::new();
            for e in &entries {
                text.push_str(&serde_json::to_string(e)?);
                text.push('\n');
            }
            emit(&text)?;
        }
    }
    Ok(())
}

fn simulate(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = SimConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if out.is_some() {
        cfg.output = out;
    }
    let report = run_experiment(&cfg)?;
    let queries = report.traces.len() / cfg.strategies.len().max(1);
    match &cfg.output {
        Some(dir) => emit(&format!(
            "{} rows ({} queries x {} strategies x {}) written to {}\n",
            report.rows.len(),
            queries,
            cfg.strategies.len(),
            cfg.max_k,
            dir.display()
        )),
        None => emit(&report.to_csv()),
    }
}

fn eval_disambig(results: &Path, kb: &Path, out: Option<&Path>) -> Result<()> {
    let kb = KnowledgeBase::load(kb).with_context(|| format!("loading {}", kb.display()))?;
    let report = evaluate_run_dir(results, &kb).with_context(|| format!("evaluating {}", results.display()))?;
    if report.rows.is_empty() {
        bail!("no checkpoint has gold mentions to score");
    }
    if let Some(path) = out {
        fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut text = String::from("strategy,k,mean_accuracy\n");
    for (strategy, k, mean) in report.means() {
        text.push_str(&format!("\"{strategy}\",{k},{mean:.2}\n"));
    }
    if let Some(c) = report.mean_ceiling() {
        text.push_str(&format!("ceiling,,{c:.2}\n"));
    }
    emit(&text)
}

fn serve(args: &ServeArgs) -> Result<()> {
    let index = load_index(&args.index).with_context(|| format!("loading {}", args.index.display()))?;
    let corpus_name = args
        .index
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let config = ApiConfig {
        corpus_name,
        busy: args.busy,
        snapshot_dir: args.snapshots.clone(),
        snippet_window: args.snippet_window,
        options: SessionOptions::default(),
        cors_origins: args.ui_origin.clone(),
    };
    let state = AppState::new(Arc::new(index), config);
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", args.host, args.port))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        emit(&format!("listening on http://{}\n", listener.local_addr()?))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        api::serve(listener, state, shutdown).await?;
        Ok(())
    })
}
