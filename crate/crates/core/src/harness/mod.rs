//! Experiment engine: datasets, NMSE and complexity sweeps, the throughput
//! simulation and report output.

mod config;
mod dataset;
mod report;
mod sweep;
mod throughput;

pub use config::{ExperimentConfig, POLICY_NAMES};
pub use dataset::{
    effective_sinr_trace, generate_dataset, link_trace, point_seed, realization_seed, DatasetSplit, LinkChain,
    Provenance, Split,
};
pub use report::{emit_report, records_to_csv, records_to_summary, CSV_HEADER};
pub use sweep::{
    evaluate, evaluate_hold, run_complexity_sweep, run_nmse_sweep, train_and_evaluate, Evaluation, SweepRecord,
    TrainedPoint,
};
pub use throughput::{
    run_throughput_sim, run_throughput_sweep, success_probability, LinkPolicy, OraclePolicy, PolicyContext,
    PolicyRegistry, PolicyThroughput, PredictivePolicy, SlotView, StalePolicy, RE_PER_RB,
};
