use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::runner::{csv_field, CeilingRow, Disambig, SessionTrace, MANIFEST_FILE, TRACES_FILE};
use super::workload::{load_workload, read_jsonl, WorkloadEntry};
use crate::corpus::{load_index, CorpusIndex};
use crate::disambig::KnowledgeBase;
use crate::error::{Error, Result};
use crate::strategy::StrategyName;

/// Accuracy of one saved checkpoint representation.
#[derive(Debug, Clone, PartialEq)]
pub struct DisambigRow {
    pub query: String,
    pub strategy: StrategyName,
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisambigReport {
    pub rows: Vec<DisambigRow>,
    pub ceiling: Vec<CeilingRow>,
}

impl DisambigReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query,strategy,k,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.4}",
                csv_field(&r.query),
                csv_field(&r.strategy.to_string()),
                r.k,
                r.accuracy
            );
        }
        out
    }

    /// Mean accuracy per (strategy, k), in first-seen strategy order.
    pub fn means(&self) -> Vec<(StrategyName, usize, f64)> {
        let mut order: Vec<StrategyName> = Vec::new();
        let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let pos = match order.iter().position(|s| *s == r.strategy) {
                Some(p) => p,
                None => {
                    order.push(r.strategy);
                    order.len() - 1
                }
            };
            let e = sums.entry((pos, r.k)).or_insert((0.0, 0));
            e.0 += r.accuracy;
            e.1 += 1;
        }
        sums.into_iter()
            .map(|((pos, k), (sum, n))| (order[pos], k, sum / n as f64))
            .collect()
    }

    pub fn mean_ceiling(&self) -> Option<f64> {
        if self.ceiling.is_empty() {
            None
        } else {
            Some(self.ceiling.iter().map(|c| c.accuracy).sum::<f64>() / self.ceiling.len() as f64)
        }
    }
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<SessionTrace>> {
    read_jsonl(path.as_ref())
}

/// Scores every checkpoint representation in `traces` against `kb`.
pub fn evaluate_traces(
    index: &CorpusIndex,
    workload: &[WorkloadEntry],
    kb: &KnowledgeBase,
    traces: &[SessionTrace],
    gold_sample: usize,
    seed: u64,
) -> Result<DisambigReport> {
    let scorer = Disambig::new(index, workload, kb, gold_sample, seed);
    let mut report = DisambigReport::default();
    for q in workload {
        if let Some(accuracy) = scorer.ceiling(q)? {
            report.ceiling.push(CeilingRow {
                query: q.entity.clone(),
                accuracy,
            });
        }
    }
    for t in traces {
        if !workload.iter().any(|q| q.entity == t.query) {
            return Err(Error::NotFound(format!("trace query {} is not in the workload", t.query)));
        }
        for c in &t.checkpoints {
            if let Some(accuracy) = scorer.accuracy(&t.query, &c.representation)? {
                report.rows.push(DisambigRow {
                    query: t.query.clone(),
                    strategy: t.strategy,
                    k: c.k,
                    accuracy,
                });
            }
        }
    }
    Ok(report)
}

#[derive(Deserialize)]
struct RunManifest {
    v: u32,
    corpus: PathBuf,
    workload: PathBuf,
    seed: u64,
    gold_sample: usize,
}

/// Re-scores a finished run directory against a (possibly different) KB,
/// using the corpus, workload and sampling seed recorded in its manifest.
pub fn evaluate_run_dir(dir: impl AsRef<Path>, kb: &KnowledgeBase) -> Result<DisambigReport> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let raw = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: RunManifest = serde_json::from_str(&raw)?;
    if manifest.v != 1 {
        return Err(Error::Config(format!("unsupported manifest version {}", manifest.v)));
    }
    let index = load_index(&manifest.corpus)?;
    let workload = load_workload(&manifest.workload)?;
    let traces = read_traces(dir.join(TRACES_FILE))?;
    evaluate_traces(&index, &workload, kb, &traces, manifest.gold_sample, manifest.seed)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::disambig::KnowledgeBase;
    use crate::sim::{generate_workload, run_on, synth_corpus, RunInputs, SimConfig, SynthParams, WorkloadCriteria};

    #[test]
    fn rescoring_matches_the_runner() {
        let synth = synth_corpus(SynthParams {
            seed: 3,
            n_entities: 4,
            docs_per_entity: 12,
            kps_per_entity: 30,
            confusable_pairs: 2,
        })
        .unwrap();
        let index = Arc::new(synth.index().unwrap());
        let criteria = WorkloadCriteria {
            min_keyphrases: 10,
            ..WorkloadCriteria::default()
        };
        let workload = generate_workload(&index, &synth.catalog, &criteria);
        assert!(!workload.is_empty());
        let kb = KnowledgeBase::new(synth.kb.clone());
        let mut cfg = SimConfig::new("", "");
        cfg.max_k = 10;
        cfg.checkpoints = vec![5, 10];
        cfg.strategies = vec!["Lm".parse().unwrap(), "Div_Ent".parse().unwrap()];
        let run = run_on(
            &RunInputs {
                index: Arc::clone(&index),
                workload: &workload,
                kb: Some(&kb),
            },
            &cfg,
        )
        .unwrap();
        let again = evaluate_traces(&index, &workload, &kb, &run.traces, cfg.gold_sample, cfg.seed).unwrap();
        let from_runner: Vec<f64> = run.rows.iter().filter_map(|r| r.accuracy).collect();
        let rescored: Vec<f64> = again.rows.iter().map(|r| r.accuracy).collect();
        assert_eq!(from_runner, rescored);
        assert_eq!(again.ceiling, run.ceiling);
        assert_eq!(again.means().len(), 4);
    }

    #[test]
    fn unknown_trace_query_is_rejected() {
        let index = CorpusIndex::build(vec![]).unwrap();
        let trace = SessionTrace {
            v: 1,
            query: "ghost".into(),
            strategy: "Lm".parse().unwrap(),
            names: vec![],
            seed_keyphrases: vec![],
            steps: vec![],
            exhausted: true,
            checkpoints: vec![],
        };
        let err = evaluate_traces(&index, &[], &KnowledgeBase::new(vec![]), &[trace], 10, 0).unwrap_err();
        assert!(matches!(err, Error::NotFound(_)));
    }
}
