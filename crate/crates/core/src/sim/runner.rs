use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::judge::simulated_judge;
use super::workload::{load_workload, WorkloadEntry};
use crate::corpus::{load_index, CorpusIndex};
use crate::disambig::{disambiguation_accuracy, gold_documents, EntityPriors, GoldDocument, KnowledgeBase};
use crate::error::{Error, Result};
use crate::interleave::ListSide;
use crate::metrics::{coverage_at, engagement_at};
use crate::session::{EntityRepresentation, Session, SessionOptions};
use crate::strategy::{StrategyName, BENCHMARK_STRATEGIES};

pub const RESULTS_FILE: &str = "results.csv";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const CEILING_FILE: &str = "ceiling.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn default_strategies() -> Vec<StrategyName> {
    BENCHMARK_STRATEGIES
        .iter()
        .map(|s| s.parse().expect("benchmark strategy names parse"))
        .collect()
}

fn default_max_k() -> usize {
    20
}

fn default_checkpoints() -> Vec<usize> {
    vec![5, 10, 15, 20]
}

fn default_gold_sample() -> usize {
    100
}

fn default_static_depth() -> usize {
    crate::session::DEFAULT_STATIC_DEPTH
}

fn default_mu() -> f64 {
    crate::retrieval::DEFAULT_MU
}

/// Batch experiment configuration (`sim.json`). Relative paths are resolved
/// against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyName>,
    #[serde(default = "default_max_k")]
    pub max_k: usize,
    pub corpus: PathBuf,
    pub workload: PathBuf,
    #[serde(default)]
    pub kb: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
    /// Documents per query sampled for disambiguation accuracy.
    #[serde(default = "default_gold_sample")]
    pub gold_sample: usize,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_static_depth")]
    pub static_depth: usize,
}

impl SimConfig {
    pub fn new(corpus: impl Into<PathBuf>, workload: impl Into<PathBuf>) -> Self {
        SimConfig {
            strategies: default_strategies(),
            max_k: default_max_k(),
            corpus: corpus.into(),
            workload: workload.into(),
            kb: None,
            output: None,
            seed: 0,
            checkpoints: default_checkpoints(),
            gold_sample: default_gold_sample(),
            mu: default_mu(),
            static_depth: default_static_depth(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: SimConfig = serde_json::from_str(&raw)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.corpus);
        resolve(&mut cfg.workload);
        if let Some(p) = cfg.kb.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.output.as_mut() {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_k == 0 {
            return Err(Error::Config("max_k must be >= 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies configured".into()));
        }
        if self.checkpoints.contains(&0) {
            return Err(Error::Config("checkpoints must be >= 1".into()));
        }
        if self.static_depth == 0 {
            return Err(Error::Config("static_depth must be >= 1".into()));
        }
        Ok(())
    }

    pub fn session_options(&self) -> SessionOptions<f64> {
        SessionOptions {
            mu: self.mu,
            static_depth: self.static_depth,
            ..SessionOptions::default()
        }
    }
}

/// One CSV row: metrics of one (query, strategy) cell after `k` documents.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub query: String,
    pub strategy: StrategyName,
    pub k: usize,
    pub coverage: f64,
    /// Undefined until the first document is judged.
    pub engagement: Option<f64>,
    /// Only at checkpoints, and only when a knowledge base is configured.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub doc_id: String,
    pub relevant: bool,
    pub accepted_keyphrases: BTreeSet<String>,
    pub consequential: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<ListSide>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ListSide>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    pub representation: EntityRepresentation<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

/// Replayable record of one simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub v: u32,
    pub query: String,
    pub strategy: StrategyName,
    pub names: Vec<String>,
    pub seed_keyphrases: Vec<String>,
    pub steps: Vec<TraceStep>,
    /// Set when the strategy ran dry before `max_k`; later rows repeat the
    /// last values.
    pub exhausted: bool,
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeilingRow {
    pub query: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<SessionTrace>,
    /// Accuracy of the exact ground-truth representation, per query.
    pub ceiling: Vec<CeilingRow>,
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query,strategy,k,coverage,engagement,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{},{}",
                csv_field(&r.query),
                csv_field(&r.strategy.to_string()),
                r.k,
                r.coverage,
                fmt_opt(r.engagement, 6),
                fmt_opt(r.accuracy, 4),
            );
        }
        out
    }

    pub fn ceiling_csv(&self) -> String {
        let mut out = String::from("query,accuracy\n");
        for c in &self.ceiling {
            let _ = writeln!(out, "{},{:.4}", csv_field(&c.query), c.accuracy);
        }
        out
    }

    pub fn traces_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for t in &self.traces {
            out.push_str(&serde_json::to_string(t)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Rows of one cell, ordered by k.
    pub fn cell(&self, query: &str, strategy: StrategyName) -> Vec<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.query == query && r.strategy == strategy)
            .collect()
    }

    pub fn write_to(&self, dir: impl AsRef<Path>, manifest: &serde_json::Value) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        put(RESULTS_FILE, self.to_csv())?;
        put(TRACES_FILE, self.traces_jsonl()?)?;
        if !self.ceiling.is_empty() {
            put(CEILING_FILE, self.ceiling_csv())?;
        }
        put(MANIFEST_FILE, serde_json::to_string_pretty(manifest)? + "\n")
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Reads a results CSV back into rows.
pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_err = |m: String| Error::Parse { line: i + 2, message: m };
        let num = |j: usize| -> Result<Option<f64>> {
            let f = rec.get(j).unwrap_or("");
            if f.is_empty() {
                Ok(None)
            } else {
                f.parse().map(Some).map_err(|e| parse_err(format!("column {j}: {e}")))
            }
        };
        rows.push(ResultRow {
            query: rec.get(0).unwrap_or("").to_string(),
            strategy: rec.get(1).unwrap_or("").parse()?,
            k: rec
                .get(2)
                .unwrap_or("")
                .parse()
                .map_err(|e| parse_err(format!("k: {e}")))?,
            coverage: num(3)?.ok_or_else(|| parse_err("missing coverage".into()))?,
            engagement: num(4)?,
            accuracy: num(5)?,
        });
    }
    Ok(rows)
}

/// Everything a run needs besides the config file.
pub struct RunInputs<'a> {
    pub index: Arc<CorpusIndex>,
    pub workload: &'a [WorkloadEntry],
    pub kb: Option<&'a KnowledgeBase>,
}

/// Gold documents and priors for scoring representations of workload queries.
pub(crate) struct Disambig<'a> {
    kb: &'a KnowledgeBase,
    priors: EntityPriors,
    gold: BTreeMap<String, Vec<GoldDocument<'a>>>,
}

impl<'a> Disambig<'a> {
    pub(crate) fn new(
        index: &'a CorpusIndex,
        workload: &[WorkloadEntry],
        kb: &'a KnowledgeBase,
        gold_sample: usize,
        seed: u64,
    ) -> Self {
        Disambig {
            kb,
            priors: EntityPriors::from_index(index),
            gold: workload
                .iter()
                .map(|q| {
                    (
                        q.entity.clone(),
                        gold_documents(index, &q.entity, &q.relevant_docs, gold_sample, seed),
                    )
                })
                .collect(),
        }
    }

    /// `None` when the query has no gold mentions.
    pub(crate) fn accuracy(&self, entity: &str, rep: &EntityRepresentation<f64>) -> Result<Option<f64>> {
        match self.gold.get(entity) {
            Some(gold) if !gold.is_empty() => {
                disambiguation_accuracy(entity, rep, gold, self.kb, &self.priors).map(Some)
            }
            _ => Ok(None),
        }
    }

    /// Accuracy of the exact reference keyphrases at uniform weight.
    pub(crate) fn ceiling(&self, query: &WorkloadEntry) -> Result<Option<f64>> {
        let weights = query.relevant_keyphrases.iter().map(|k| (k.clone(), 1.0)).collect();
        let rep = EntityRepresentation::from_weights(query.names.clone(), &weights);
        self.accuracy(&query.entity, &rep)
    }
}

/// Drives one session per (query, strategy) with the simulated user.
pub fn run_on(inputs: &RunInputs<'_>, config: &SimConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let index = &inputs.index;
    let options = config.session_options();
    let checkpoints: BTreeSet<usize> = config.checkpoints.iter().copied().filter(|&k| k <= config.max_k).collect();

    let disambig = inputs
        .kb
        .map(|kb| Disambig::new(index, inputs.workload, kb, config.gold_sample, config.seed));
    let accuracy_of = |query: &WorkloadEntry, rep: &EntityRepresentation<f64>| -> Result<Option<f64>> {
        match &disambig {
            Some(d) => d.accuracy(&query.entity, rep),
            None => Ok(None),
        }
    };

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut ceiling = Vec::new();
    for query in inputs.workload {
        let truth = query.truth();
        if truth.relevant_keyphrases.is_empty() {
            return Err(Error::UndefinedMetric(format!(
                "query {} has no relevant keyphrases",
                query.entity
            )));
        }
        if let Some(accuracy) = disambig.as_ref().map(|d| d.ceiling(query)).transpose()?.flatten() {
            ceiling.push(CeilingRow {
                query: query.entity.clone(),
                accuracy,
            });
        }
        for &strategy in &config.strategies {
            let mut session = Session::start(
                Arc::clone(index),
                &query.names,
                &query.seed_keyphrases,
                strategy,
                options,
                Some(&truth),
            )?;
            let mut steps = Vec::new();
            let mut trace_checkpoints = Vec::new();
            for k in 1..=config.max_k {
                if let Some(doc_id) = session.next_document()? {
                    let doc = index.require(&doc_id)?;
                    let (relevant, accepted) = simulated_judge(doc, &truth);
                    let accepted: Vec<String> = accepted.into_iter().collect();
                    let judgment = session.apply_judgment(&doc_id, relevant, &accepted)?.clone();
                    let draw = session
                        .strategy()
                        .interleave_state()
                        .and_then(|s| s.history().last())
                        .filter(|d| d.doc_id == doc_id);
                    steps.push(TraceStep {
                        doc_id,
                        relevant,
                        accepted_keyphrases: judgment.accepted_keyphrases,
                        consequential: judgment.consequential,
                        active: draw.map(|d| d.active),
                        source: draw.map(|d| d.source),
                    });
                }
                let state = session.state();
                let coverage: f64 = coverage_at(state.selected_keyphrases().iter(), &truth)?;
                let trace = state.engagement_trace();
                let engagement = if trace.is_empty() {
                    None
                } else {
                    Some(engagement_at::<f64>(&trace)?)
                };
                let mut accuracy = None;
                if checkpoints.contains(&k) {
                    let rep = session.finish();
                    accuracy = accuracy_of(query, &rep)?;
                    trace_checkpoints.push(Checkpoint {
                        k,
                        representation: rep,
                        accuracy,
                    });
                }
                rows.push(ResultRow {
                    query: query.entity.clone(),
                    strategy,
                    k,
                    coverage,
                    engagement,
                    accuracy,
                });
            }
            traces.push(SessionTrace {
                v: 1,
                query: query.entity.clone(),
                strategy,
                names: session.state().names.clone(),
                seed_keyphrases: session.state().seed_keyphrases.clone(),
                steps,
                exhausted: session.is_exhausted(),
                checkpoints: trace_checkpoints,
            });
        }
    }
    Ok(ExperimentReport { rows, traces, ceiling })
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Loads the configured inputs, runs every cell and, when `output` is set,
/// writes `results.csv`, `traces.jsonl`, `ceiling.csv` and `manifest.json`.
pub fn run_experiment(config: &SimConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let index = Arc::new(load_index(&config.corpus)?);
    let workload = load_workload(&config.workload)?;
    let kb = config.kb.as_ref().map(KnowledgeBase::load).transpose()?;
    let report = run_on(
        &RunInputs {
            index,
            workload: &workload,
            kb: kb.as_ref(),
        },
        config,
    )?;
    if let Some(out) = &config.output {
        let manifest = serde_json::json!({
            "v": 1,
            "corpus": absolute(&config.corpus),
            "workload": absolute(&config.workload),
            "kb": config.kb.as_deref().map(absolute),
            "seed": config.seed,
            "gold_sample": config.gold_sample,
            "max_k": config.max_k,
            "checkpoints": config.checkpoints,
            "strategies": config.strategies.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "queries": workload.len(),
            "rows": report.rows.len(),
        });
        report.write_to(out, &manifest)?;
    }
    Ok(report)
}
