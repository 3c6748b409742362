//! Data ingestion, the learner roster, and experiment orchestration.

pub mod experiment;
pub mod io;
pub mod learners;

pub use experiment::{
    dataset_stats, lower_median, run_benchmark, run_simulation_study, summarize, train_test_split, write_report_csv,
    write_run, write_summary_csv, BenchmarkConfig, DatasetSpec, DatasetStats, ExperimentReport, RunOptions,
    SimulationGrid, Summary,
};
pub use io::{
    load_csv, load_csv_reader, load_csv_with_schema, read_feature_rows, write_dataset_csv, write_predictions,
};
pub use learners::{fit_learner, learn_structure, Learner, LearnerSettings, Structure};
