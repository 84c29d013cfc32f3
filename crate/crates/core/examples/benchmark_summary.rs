//! Generates the seed-42 benchmark in memory, runs every strategy and prints
//! mean coverage/engagement at the checkpoints plus win/loss against `Lm`.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use eicharvest::disambig::KnowledgeBase;
use eicharvest::metrics::win_loss;
use eicharvest::sim::{generate_workload, run_on, synth_corpus, RunInputs, SimConfig, SynthParams, WorkloadCriteria};
use eicharvest::StrategyName;

fn main() -> eicharvest::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let t0 = Instant::now();
    let synth = synth_corpus(SynthParams::benchmark(seed))?;
    let index = Arc::new(synth.index()?);
    let workload = generate_workload(&index, &synth.catalog, &WorkloadCriteria::default());
    let kb = KnowledgeBase::new(synth.kb.clone());
    println!("{} docs, {} queries, generated in {:?}", index.len(), workload.len(), t0.elapsed());

    let t1 = Instant::now();
    let cfg = SimConfig::new("", "");
    let report = run_on(
        &RunInputs {
            index,
            workload: &workload,
            kb: Some(&kb),
        },
        &cfg,
    )?;
    println!("ran {} cells in {:?}", report.traces.len(), t1.elapsed());

    let lm: StrategyName = "Lm".parse()?;
    println!("{:<30} {:>8} {:>8} {:>8} {:>8} {:>6} {:>8}", "strategy", "cov@5", "cov@20", "eng@20", "acc@20", "w/l", "rel@20");
    for s in &cfg.strategies {
        let mean = |k: usize, f: &dyn Fn(&eicharvest::sim::ResultRow) -> Option<f64>| {
            let v: Vec<f64> = report.rows.iter().filter(|r| r.strategy == *s && r.k == k).filter_map(f).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        let per_query: BTreeMap<&str, (f64, f64)> = workload
            .iter()
            .map(|q| {
                let c = |st: StrategyName| report.cell(&q.entity, st).last().map(|r| r.coverage).unwrap_or(0.0);
                (q.entity.as_str(), (c(*s), c(lm)))
            })
            .collect();
        let (w, l) = win_loss(&per_query);
        let traces: Vec<_> = report.traces.iter().filter(|t| t.strategy == *s).collect();
        let rel = traces.iter().map(|t| t.steps.iter().filter(|x| x.relevant).count()).sum::<usize>() as f64
            / traces.len().max(1) as f64;
        println!(
            "{:<30} {:>8.3} {:>8.3} {:>8.3} {:>8.1} {:>3}/{:<3} {:>6.1}",
            s.to_string(),
            mean(5, &|r| Some(r.coverage)),
            mean(20, &|r| Some(r.coverage)),
            mean(20, &|r| r.engagement),
            mean(20, &|r| r.accuracy),
            w,
            l,
            rel
        );
    }
    let ceiling: f64 = report.ceiling.iter().map(|c| c.accuracy).sum::<f64>() / report.ceiling.len().max(1) as f64;
    println!("ceiling accuracy {ceiling:.1}");
    Ok(())
}
