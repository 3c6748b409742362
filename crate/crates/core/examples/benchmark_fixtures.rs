//! The benchmark protocol on the bundled fixtures: repeated 80/20 splits,
//! all nine learners, per-row report and median summary.

use std::path::Path;

use sevt::harness::{load_csv, run_benchmark, summarize, write_summary_csv, Learner, LearnerSettings, RunOptions};

fn main() -> sevt::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let datasets = vec![
        ("titanic".to_string(), load_csv(&dir.join("titanic.csv"), "Survived")?),
        ("monks1".to_string(), load_csv(&dir.join("monks1.csv"), "class")?),
    ];
    let reports = run_benchmark(
        &datasets,
        &Learner::ROSTER,
        10,
        2024,
        &LearnerSettings::default(),
        &RunOptions::from_env()?,
    )?;
    let failed = reports.iter().filter(|r| r.outcome.is_err()).count();
    println!("{} rows, {failed} failed", reports.len());
    write_summary_csv(&summarize(&reports), std::io::stdout().lock())
}
