//! Benchmark and simulation runs, report tables and summaries.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::learners::{fit_learner, Learner, LearnerSettings};
use crate::classify::{metrics, normalized_entropy, predict_dataset, Metrics};
use crate::error::{Error, Result};
use crate::schema::Dataset;
use crate::simgen::{generate, Process, SimConfig};

/// Environment variable holding the worker count of experiment runs.
pub const WORKERS_ENV: &str = "SEVT_WORKERS";

/// Column header of report tables.
pub const REPORT_HEADER: [&str; 10] = [
    "dataset",
    "learner",
    "rep",
    "seed",
    "accuracy",
    "macro_f1",
    "balanced_accuracy",
    "macro_precision",
    "fit_seconds",
    "predict_seconds",
];

/// Column header of summary tables.
pub const SUMMARY_HEADER: [&str; 10] = [
    "dataset",
    "learner",
    "runs",
    "failures",
    "accuracy",
    "macro_f1",
    "balanced_accuracy",
    "macro_precision",
    "fit_seconds",
    "predict_seconds",
];

/// Summary statistics of a data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetStats {
    pub observations: usize,
    pub variables: usize,
    /// Size of the joint sample space; `None` if it overflows.
    pub atomic_events: Option<usize>,
    /// Normalized entropy of the class distribution.
    pub imbalance: f64,
}

pub fn dataset_stats(data: &Dataset) -> DatasetStats {
    let schema = data.schema();
    DatasetStats {
        observations: data.n_records(),
        variables: schema.n_vars(),
        atomic_events: schema.atomic_event_count(),
        imbalance: normalized_entropy(&data.class_labels(), schema.class_cardinality()),
    }
}

/// Shuffles the records with `seed` and puts the first ⌈fraction·n⌉ in the
/// training part.
pub fn train_test_split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = data.n_records();
    if n < 5 {
        return Err(Error::Domain(format!("a split needs at least 5 records, got {n}")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Domain(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * n as f64) - 1e-9).ceil() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let train = data.subset(&order[..n_train]);
    let test = data.subset(&order[n_train..]);

    let in_train = train.value_counts(0);
    let missing: Vec<&str> = test
        .value_counts(0)
        .iter()
        .enumerate()
        .filter(|&(c, &k)| k > 0 && in_train[c] == 0)
        .map(|(c, _)| data.schema().variable(0).levels[c].as_str())
        .collect();
    if !missing.is_empty() {
        warn!("class values {missing:?} occur in the test part only");
    }
    Ok((train, test))
}

/// One (data set, learner, repetition) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub dataset: String,
    pub learner: String,
    pub rep: usize,
    pub seed: u64,
    /// Metrics, or the reason the cell failed.
    pub outcome: std::result::Result<Metrics, String>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

/// Execution settings that do not change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    /// Record wall-clock times. When off, times are reported as 0 so that
    /// report files depend on the seed alone.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: None,
            timing: true,
        }
    }
}

impl RunOptions {
    /// Reads the worker count from [`WORKERS_ENV`].
    pub fn from_env() -> Result<Self> {
        let workers = match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&w| w > 0)
                    .ok_or_else(|| Error::Domain(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?,
            ),
            Err(_) => None,
        };
        Ok(RunOptions {
            workers,
            ..RunOptions::default()
        })
    }

    fn install<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            builder = builder.num_threads(w);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(job))
    }
}

/// Seed of repetition `rep`: the base seed XOR the repetition index.
pub fn rep_seed(base: u64, rep: usize) -> u64 {
    base ^ rep as u64
}

/// Fits `learner` on `train`, scores it on `test`. Errors and panics become a
/// failed report.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    dataset: &str,
    learner: Learner,
    rep: usize,
    seed: u64,
    train: &Dataset,
    test: &Dataset,
    settings: &LearnerSettings,
    timing: bool,
) -> ExperimentReport {
    let mut fit_seconds = 0.0;
    let mut predict_seconds = 0.0;
    let run = || -> Result<Metrics> {
        let start = Instant::now();
        let model = fit_learner(learner, train, settings, seed)?;
        let fitted = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let test = test.reorder_to(model.schema())?;
        let predicted: Vec<usize> = predict_dataset(&model, &test)?.iter().map(|p| p.class).collect();
        let m = metrics(&predicted, &test.class_labels())?;
        if timing {
            fit_seconds = fitted;
            predict_seconds = start.elapsed().as_secs_f64();
        }
        Ok(m)
    };
    let outcome = match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(m)) => Ok(m),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => Err(panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "learner panicked".into())),
    };
    if let Err(e) = &outcome {
        warn!("{dataset} / {learner} / rep {rep} failed: {e}");
    }
    ExperimentReport {
        dataset: dataset.to_string(),
        learner: learner.id(),
        rep,
        seed,
        outcome,
        fit_seconds,
        predict_seconds,
    }
}

/// Repeated 80/20 splits of every data set, every learner fitted on each
/// split. Rows come out ordered by data set, learner, repetition. All
/// learners of one repetition see the same split.
pub fn run_benchmark(
    datasets: &[(String, Dataset)],
    learners: &[Learner],
    reps: usize,
    seed: u64,
    settings: &LearnerSettings,
    options: &RunOptions,
) -> Result<Vec<ExperimentReport>> {
    let mut splits = Vec::with_capacity(datasets.len() * reps);
    for (d, (_, data)) in datasets.iter().enumerate() {
        for rep in 0..reps {
            let cell_seed = rep_seed(seed, rep);
            splits.push((d, rep, cell_seed, train_test_split(data, 0.8, cell_seed)?));
        }
    }
    let mut cells = Vec::new();
    for (d, _) in datasets.iter().enumerate() {
        for (l, &learner) in learners.iter().enumerate() {
            for rep in 0..reps {
                cells.push((d, l, learner, rep));
            }
        }
    }
    info!("benchmark: {} cells", cells.len());
    options.install(|| {
        cells
            .par_iter()
            .map(|&(d, _, learner, rep)| {
                let (_, _, cell_seed, (train, test)) = &splits[d * reps + rep];
                evaluate(
                    &datasets[d].0,
                    learner,
                    rep,
                    *cell_seed,
                    train,
                    test,
                    settings,
                    options.timing,
                )
            })
            .collect()
    })
}

/// Grid of simulated data sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationGrid {
    pub processes: Vec<Process>,
    pub ps: Vec<usize>,
    pub learners: Vec<Learner>,
    pub reps: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub settings: LearnerSettings,
}

impl Default for SimulationGrid {
    fn default() -> Self {
        SimulationGrid {
            processes: vec![Process::RandomSevt, Process::Linear, Process::Xor],
            ps: (2..=15).collect(),
            learners: Learner::ROSTER.to_vec(),
            reps: 100,
            n_train: 1000,
            n_test: 1000,
            seed: 0,
            settings: LearnerSettings::default(),
        }
    }
}

/// Data set id used in simulation reports.
pub fn simulation_id(process: Process, p: usize) -> String {
    format!("{}_p{p}", process.name())
}

/// Every learner on every generated (process, p, repetition) data set. Rows
/// are ordered by process, p, learner, repetition.
pub fn run_simulation_study(grid: &SimulationGrid, options: &RunOptions) -> Result<Vec<ExperimentReport>> {
    let mut datasets = Vec::new();
    for &process in &grid.processes {
        for &p in &grid.ps {
            for rep in 0..grid.reps {
                datasets.push((process, p, rep, rep_seed(grid.seed, rep)));
            }
        }
    }
    info!(
        "simulation: {} data sets x {} learners",
        datasets.len(),
        grid.learners.len()
    );
    let per_dataset: Vec<Vec<ExperimentReport>> = options.install(|| {
        datasets
            .par_iter()
            .map(|&(process, p, rep, seed)| {
                let id = simulation_id(process, p);
                let cfg = SimConfig {
                    process,
                    p,
                    n_train: grid.n_train,
                    n_test: grid.n_test,
                    seed,
                };
                match generate(&cfg) {
                    Ok(sim) => grid
                        .learners
                        .par_iter()
                        .map(|&l| evaluate(&id, l, rep, seed, &sim.train, &sim.test, &grid.settings, options.timing))
                        .collect(),
                    Err(e) => grid
                        .learners
                        .iter()
                        .map(|l| ExperimentReport {
                            dataset: id.clone(),
                            learner: l.id(),
                            rep,
                            seed,
                            outcome: Err(e.to_string()),
                            fit_seconds: 0.0,
                            predict_seconds: 0.0,
                        })
                        .collect(),
                }
            })
            .collect()
    })?;

    let reps = grid.reps;
    let n_learners = grid.learners.len();
    let mut rows: Vec<Option<ExperimentReport>> = per_dataset.into_iter().flatten().map(Some).collect();
    let mut ordered = Vec::with_capacity(rows.len());
    let cells = grid.processes.len() * grid.ps.len();
    for cell in 0..cells {
        for l in 0..n_learners {
            for rep in 0..reps {
                let idx = (cell * reps + rep) * n_learners + l;
                ordered.push(rows[idx].take().expect("each row is emitted once"));
            }
        }
    }
    Ok(ordered)
}

/// Middle element of the sorted values; the lower one for even counts.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

/// Per (data set, learner) medians over successful repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub dataset: String,
    pub learner: String,
    pub runs: usize,
    pub failures: usize,
    /// Absent when every repetition failed.
    pub median: Option<Metrics>,
    pub fit_seconds: Option<f64>,
    pub predict_seconds: Option<f64>,
}

/// Groups rows by (data set, learner) in order of first appearance.
pub fn summarize(reports: &[ExperimentReport]) -> Vec<Summary> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&ExperimentReport>> = BTreeMap::new();
    for r in reports {
        let key = (r.dataset.clone(), r.learner.clone());
        let slot = groups.entry(key.clone()).or_default();
        if slot.is_empty() {
            order.push(key);
        }
        slot.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let ok: Vec<(&ExperimentReport, &Metrics)> = rows
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok().map(|m| (*r, m)))
                .collect();
            let med = |f: &dyn Fn(&ExperimentReport, &Metrics) -> f64| {
                lower_median(&ok.iter().map(|(r, m)| f(r, m)).collect::<Vec<_>>())
            };
            let median = med(&|_, m| m.accuracy).map(|accuracy| Metrics {
                accuracy,
                macro_f1: med(&|_, m| m.macro_f1).unwrap(),
                balanced_accuracy: med(&|_, m| m.balanced_accuracy).unwrap(),
                macro_precision: med(&|_, m| m.macro_precision).unwrap(),
            });
            Summary {
                runs: rows.len(),
                failures: rows.len() - ok.len(),
                median,
                fit_seconds: med(&|r, _| r.fit_seconds),
                predict_seconds: med(&|r, _| r.predict_seconds),
                dataset: key.0,
                learner: key.1,
            }
        })
        .collect()
}

fn fmt_metric(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_report_csv(reports: &[ExperimentReport], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        let mut rec = vec![
            r.dataset.clone(),
            r.learner.clone(),
            r.rep.to_string(),
            r.seed.to_string(),
        ];
        match &r.outcome {
            Ok(m) => rec.extend([m.accuracy, m.macro_f1, m.balanced_accuracy, m.macro_precision].map(fmt_metric)),
            Err(_) => rec.extend(std::iter::repeat_n(String::new(), 4)),
        }
        rec.push(fmt_metric(r.fit_seconds));
        rec.push(fmt_metric(r.predict_seconds));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(summaries: &[Summary], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    let opt = |x: Option<f64>| x.map(fmt_metric).unwrap_or_default();
    for s in summaries {
        let mut rec = vec![
            s.dataset.clone(),
            s.learner.clone(),
            s.runs.to_string(),
            s.failures.to_string(),
        ];
        let m = s.median.as_ref();
        rec.push(opt(m.map(|m| m.accuracy)));
        rec.push(opt(m.map(|m| m.macro_f1)));
        rec.push(opt(m.map(|m| m.balanced_accuracy)));
        rec.push(opt(m.map(|m| m.macro_precision)));
        rec.push(opt(s.fit_seconds));
        rec.push(opt(s.predict_seconds));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Creates `path` for writing; fails if it already exists.
pub fn create_new(path: &Path) -> Result<File> {
    OpenOptions::new().write(true).create_new(true).open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::Domain(format!("refusing to overwrite `{}`", path.display()))
        } else {
            Error::Io(e)
        }
    })
}

/// Writes `report.csv` and `summary.csv` into `dir` (created if needed).
/// Existing files are never overwritten.
pub fn write_run(dir: &Path, reports: &[ExperimentReport]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_report_csv(reports, create_new(&dir.join("report.csv"))?)?;
    write_summary_csv(&summarize(reports), create_new(&dir.join("summary.csv"))?)?;
    Ok(())
}

/// A data set entry of a benchmark configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: std::path::PathBuf,
    pub class: String,
    /// Report id; defaults to the file stem.
    #[serde(default)]
    pub name: Option<String>,
}

impl DatasetSpec {
    pub fn id(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.path.display().to_string())
        })
    }
}

/// Full benchmark grid as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "roster")]
    pub learners: Vec<Learner>,
    #[serde(default = "ten")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub settings: LearnerSettings,
}

fn roster() -> Vec<Learner> {
    Learner::ROSTER.to_vec()
}

fn ten() -> usize {
    10
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::CategoricalSchema;
    use std::sync::Arc;

    fn toy(n: usize) -> Dataset {
        let s = Arc::new(CategoricalSchema::from_cardinalities(&[2, 2, 3]).unwrap());
        let rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i % 2, (i / 2) % 2, i % 3]).collect();
        Dataset::new(s, &rows).unwrap()
    }

    #[test]
    fn split_sizes_and_partition() {
        let d = toy(10);
        let (tr, te) = train_test_split(&d, 0.8, 3).unwrap();
        assert_eq!((tr.n_records(), te.n_records()), (8, 2));
        let (tr2, te2) = train_test_split(&d, 0.8, 3).unwrap();
        assert_eq!((tr.clone(), te.clone()), (tr2, te2));
        let mut all: Vec<Vec<usize>> = tr.rows().chain(te.rows()).map(<[usize]>::to_vec).collect();
        let mut orig: Vec<Vec<usize>> = d.rows().map(<[usize]>::to_vec).collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
        assert_eq!(train_test_split(&toy(11), 0.8, 0).unwrap().0.n_records(), 9);
        assert!(train_test_split(&toy(4), 0.8, 0).is_err());
    }

    #[test]
    fn lower_median_by_hand() {
        // sorted: 0.1 0.3 0.7 0.9 -> lower middle is 0.3
        assert_eq!(lower_median(&[0.9, 0.1, 0.7, 0.3]), Some(0.3));
        assert_eq!(lower_median(&[0.5, 0.2, 0.4]), Some(0.4));
        assert_eq!(lower_median(&[]), None);
    }

    #[test]
    fn repetition_seeds() {
        assert_eq!(rep_seed(8, 3), 11);
        assert_eq!(rep_seed(8, 8), 0);
    }

    #[test]
    fn benchmark_cardinality_and_order() {
        let data = vec![("toy".to_string(), toy(40))];
        let learners = [Learner::NaiveKmeans, "bnc_tan_cl".parse().unwrap()];
        let opts = RunOptions {
            workers: Some(2),
            timing: false,
        };
        let rows = run_benchmark(&data, &learners, 3, 1, &LearnerSettings::default(), &opts).unwrap();
        assert_eq!(rows.len(), 6);
        let keys: Vec<(String, usize)> = rows.iter().map(|r| (r.learner.clone(), r.rep)).collect();
        assert_eq!(keys[0], ("sevt_kmeans_cmi".into(), 0));
        assert_eq!(keys[5], ("bnc_tan_cl".into(), 2));
        assert_eq!(rows[0].seed, rows[3].seed);
        let sums = summarize(&rows);
        assert_eq!(sums.len(), 2);
        assert_eq!(sums[0].runs, 3);
    }

    #[test]
    fn failed_rows_leave_metrics_blank() {
        let r = ExperimentReport {
            dataset: "d".into(),
            learner: "bnc_tan_cl".into(),
            rep: 0,
            seed: 5,
            outcome: Err("boom".into()),
            fit_seconds: 0.0,
            predict_seconds: 0.0,
        };
        let mut out = Vec::new();
        write_report_csv(std::slice::from_ref(&r), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "d,bnc_tan_cl,0,5,,,,,0.000000,0.000000");
        let s = summarize(&[r]);
        assert_eq!((s[0].runs, s[0].failures, s[0].median), (1, 1, None));
    }

    #[test]
    fn write_once() {
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &[]).unwrap();
        assert!(write_run(dir.path(), &[]).is_err());
    }
}
