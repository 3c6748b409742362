//! A small simulation grid: three processes, a few feature counts, a handful
//! of learners, and per-cell medians.

use sevt::harness::experiment::write_summary_csv;
use sevt::harness::{run_simulation_study, summarize, Learner, RunOptions, SimulationGrid};
use sevt::simgen::Process;

fn main() -> sevt::Result<()> {
    let grid = SimulationGrid {
        processes: vec![Process::RandomSevt, Process::Linear, Process::Xor],
        ps: vec![2, 4, 6],
        learners: Learner::parse_list("sevt_tan_cl,bnc_tan_cl,sevt_kmeans_cmi")?,
        reps: 5,
        n_train: 1000,
        n_test: 1000,
        seed: 11,
        ..SimulationGrid::default()
    };
    let reports = run_simulation_study(&grid, &RunOptions::from_env()?)?;
    println!("{} report rows", reports.len());
    write_summary_csv(&summarize(&reports), std::io::stdout().lock())
}
