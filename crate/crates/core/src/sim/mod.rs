//! Simulated users, workloads, synthetic collections and the batch runner.

pub mod evaluate;
pub mod judge;
pub mod runner;
pub mod synth;
pub mod workload;

pub use evaluate::{evaluate_run_dir, evaluate_traces, read_traces, DisambigReport, DisambigRow};
pub use judge::simulated_judge;
pub use runner::{run_experiment, run_on, ExperimentReport, ResultRow, RunInputs, SessionTrace, SimConfig};
pub use synth::{synth_corpus, SynthCorpus, SynthParams};
pub use workload::{
    audit_workload_entry, generate_workload, load_catalog, load_workload, save_catalog, save_workload, CatalogEntity,
    WorkloadCriteria, WorkloadEntry,
};
