use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sevt::classify::{metrics, predict};
use sevt::convert::{dag_to_staged_tree, membership_of_dag, membership_report, minimal_dag};
use sevt::harness::experiment::{create_new, dataset_stats, rep_seed, simulation_id, BenchmarkConfig, DatasetSpec};
use sevt::harness::{
    fit_learner, load_csv, load_csv_with_schema, read_feature_rows, run_benchmark, run_simulation_study,
    write_dataset_csv, write_predictions, write_run, Learner, LearnerSettings, RunOptions, SimulationGrid, Structure,
};
use sevt::learn::ScoreKind;
use sevt::serial::{model_to_json, read_artifact, read_model, Artifact, DagDocument, TreeDocument};
use sevt::simgen::{generate, Process, SimConfig};
use sevt::{Error, Result};

#[derive(Parser)]
#[command(name = "sevt", version, about = "Staged tree classifiers for categorical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a classifier from a CSV file and save it as JSON.
    Fit(FitArgs),
    /// Classify the rows of a CSV file with a saved model.
    Predict(PredictArgs),
    /// Convert between DAG and staged tree documents and report BNC membership.
    Convert(ConvertArgs),
    /// Repeated train/test benchmark of several learners on CSV data sets.
    Benchmark(BenchmarkArgs),
    /// Generate simulated data, or run the simulation study.
    Simulate(SimulateArgs),
    /// Print observations, variables, atomic events and class balance of a CSV file.
    Stats(StatsArgs),
}

#[derive(Args)]
struct Tuning {
    /// Additive smoothing of parameter estimates.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Score minimized by the staging search.
    #[arg(long, value_enum, default_value = "bic")]
    score: ScoreArg,
    /// Folds of cross-validated structure searches.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// k-means restarts.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
}

impl Tuning {
    fn settings(&self) -> LearnerSettings {
        LearnerSettings {
            smoothing: self.alpha,
            folds: self.folds,
            restarts: self.restarts,
            score: match self.score {
                ScoreArg::Bic => ScoreKind::Bic,
                ScoreArg::Aic => ScoreKind::Aic,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Bic,
    Aic,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Name of the class column.
    #[arg(long)]
    class: String,
    /// Structure learner, or a full roster id such as `sevt_3db`.
    #[arg(long, default_value = "tan_cl")]
    learner: String,
    /// Feature parents allowed by `kdb`.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Keep the BNC as learned instead of refining its staging.
    #[arg(long)]
    bnc: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tuning: Tuning,
    /// Output model file (must not exist).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with the model's feature columns; a class column, if present,
    /// is used to report metrics.
    #[arg(long)]
    data: PathBuf,
    /// Prediction CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    /// A DAG, staging, or model JSON document.
    #[arg(long)]
    input: PathBuf,
    /// Converted document: a staging for DAG input, a minimal DAG otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the membership report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report times as 0 so output depends on the seed alone.
    #[arg(long)]
    no_timing: bool,
    /// Output directory for report.csv and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Data set as `path:class_column`; repeatable.
    #[arg(long = "data")]
    data: Vec<String>,
    /// JSON file with the full grid; overrides the other grid flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated learner ids, or `all`.
    #[arg(long, default_value = "all")]
    learners: String,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[command(flatten)]
    tuning: Tuning,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Comma-separated processes: random_sevt, linear, xor.
    #[arg(long, default_value = "random_sevt,linear,xor")]
    process: String,
    /// Feature counts, as a list `2,3,5` or a range `2..15`.
    #[arg(long, default_value = "2..15")]
    p: String,
    #[arg(long, default_value_t = 1000)]
    n_train: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Write the generated data sets here instead of running learners.
    #[arg(long)]
    emit_dir: Option<PathBuf>,
    /// JSON file with the full grid; overrides the other grid flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated learner ids, or `all`.
    #[arg(long, default_value = "all")]
    learners: String,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_timing: bool,
    /// Output directory for report.csv and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    class: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Convert(a) => convert(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Simulate(a) => simulate(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn write_new(path: &Path, text: &str) -> Result<()> {
    create_new(path)?.write_all(text.as_bytes())?;
    Ok(())
}

fn resolve_learner(a: &FitArgs) -> Result<Learner> {
    if let Ok(l) = a.learner.parse::<Learner>() {
        return Ok(l);
    }
    let structure = match a.learner.as_str() {
        "tan_cl" => Structure::TanCl,
        "tan_hc" => Structure::TanHc,
        "kdb" if a.k == 0 => return Err(Error::Domain("--k must be at least 1".into())),
        "kdb" => Structure::Kdb(a.k),
        "naive_kmeans" => return Ok(Learner::NaiveKmeans),
        other => {
            return Err(Error::Domain(format!(
                "unknown learner `{other}`: use tan_cl, tan_hc, kdb, naive_kmeans or a roster id"
            )))
        }
    };
    Ok(if a.bnc {
        Learner::Bnc(structure)
    } else {
        Learner::Sevt(structure)
    })
}

fn fit(a: FitArgs) -> Result<()> {
    let learner = resolve_learner(&a)?;
    let data = load_csv(&a.data, &a.class)?;
    let model = fit_learner(learner, &data, &a.tuning.settings(), a.seed)?;
    write_new(&a.out, &model_to_json(&model))?;
    let tree = model.tree();
    println!("learner: {learner}");
    println!(
        "stages per depth: {:?} ({} free parameters)",
        (0..tree.depths()).map(|d| tree.n_stages(d)).collect::<Vec<_>>(),
        tree.free_parameter_count()
    );
    print!("{}", membership_report(tree));
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let text = fs::read_to_string(&a.data)?;
    let schema = model.schema();
    let rows = read_feature_rows(text.as_bytes(), schema)?;
    let predictions = rows.iter().map(|r| predict(&model, r)).collect::<Result<Vec<_>>>()?;
    match &a.out {
        Some(path) => write_predictions(schema, &predictions, create_new(path)?)?,
        None => write_predictions(schema, &predictions, io::stdout().lock())?,
    }
    let class = &schema.variable(0).name;
    let has_class = text
        .lines()
        .next()
        .is_some_and(|h| h.split(',').any(|c| c.trim() == class));
    if has_class {
        let labelled = load_csv_with_schema(text.as_bytes(), schema)?;
        let predicted: Vec<usize> = predictions.iter().map(|p| p.class).collect();
        let m = metrics(&predicted, &labelled.class_labels())?;
        eprintln!(
            "accuracy {:.4}  macro_f1 {:.4}  balanced_accuracy {:.4}  macro_precision {:.4}",
            m.accuracy, m.macro_f1, m.balanced_accuracy, m.macro_precision
        );
    }
    Ok(())
}

fn convert(a: ConvertArgs) -> Result<()> {
    let artifact = read_artifact(&fs::read_to_string(&a.input)?)?;
    let (doc, report) = match artifact {
        Artifact::Dag(g) => {
            let tree = dag_to_staged_tree(&g)?;
            (
                serde_json::to_string_pretty(&TreeDocument::from_tree(&tree))?,
                membership_of_dag(&g),
            )
        }
        Artifact::Tree(t) => (
            serde_json::to_string_pretty(&DagDocument::from_dag(&minimal_dag(&t)))?,
            membership_report(&t),
        ),
        Artifact::Model(m) => (
            serde_json::to_string_pretty(&DagDocument::from_dag(&minimal_dag(m.tree())))?,
            membership_report(m.tree()),
        ),
    };
    match &a.out {
        Some(path) => write_new(path, &doc)?,
        None => println!("{doc}"),
    }
    if let Some(path) = &a.report {
        write_new(path, &serde_json::to_string_pretty(&report)?)?;
    }
    eprint!("{report}");
    Ok(())
}

fn run_options(no_timing: bool) -> Result<RunOptions> {
    let mut opts = RunOptions::from_env()?;
    opts.timing = !no_timing;
    Ok(opts)
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let config = match &a.config {
        Some(path) => serde_json::from_str::<BenchmarkConfig>(&fs::read_to_string(path)?)?,
        None => {
            let datasets = a
                .data
                .iter()
                .map(|spec| {
                    let (path, class) = spec
                        .rsplit_once(':')
                        .ok_or_else(|| Error::Domain(format!("--data expects path:class, got `{spec}`")))?;
                    Ok(DatasetSpec {
                        path: path.into(),
                        class: class.into(),
                        name: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            BenchmarkConfig {
                datasets,
                learners: Learner::parse_list(&a.learners)?,
                reps: a.reps,
                seed: a.run.seed,
                settings: a.tuning.settings(),
            }
        }
    };
    if config.datasets.is_empty() {
        return Err(Error::Domain("no data sets: pass --data or --config".into()));
    }
    let datasets = config
        .datasets
        .iter()
        .map(|d| Ok((d.id(), load_csv(&d.path, &d.class)?)))
        .collect::<Result<Vec<_>>>()?;
    let reports = run_benchmark(
        &datasets,
        &config.learners,
        config.reps,
        config.seed,
        &config.settings,
        &run_options(a.run.no_timing)?,
    )?;
    write_run(&a.run.out, &reports)?;
    let failed = reports.iter().filter(|r| r.outcome.is_err()).count();
    println!(
        "{} rows ({failed} failed) written to {}",
        reports.len(),
        a.run.out.display()
    );
    Ok(())
}

fn parse_ps(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Domain(format!("--p expects `2,3,5` or `2..15`, got `{s}`"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        return if lo <= hi { Ok((lo..=hi).collect()) } else { Err(bad()) };
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let grid = match &a.config {
        Some(path) => serde_json::from_str::<SimulationGrid>(&fs::read_to_string(path)?)?,
        None => SimulationGrid {
            processes: a
                .process
                .split(',')
                .map(|p| Process::parse(p.trim()))
                .collect::<Result<_>>()?,
            ps: parse_ps(&a.p)?,
            learners: Learner::parse_list(&a.learners)?,
            reps: a.reps,
            n_train: a.n_train,
            n_test: a.n_test,
            seed: a.seed,
            settings: a.tuning.settings(),
        },
    };
    if let Some(dir) = &a.emit_dir {
        return emit(&grid, dir);
    }
    let out = a
        .out
        .as_ref()
        .ok_or_else(|| Error::Domain("simulate needs --out (study) or --emit-dir (data only)".into()))?;
    let reports = run_simulation_study(&grid, &run_options(a.no_timing)?)?;
    write_run(out, &reports)?;
    let failed = reports.iter().filter(|r| r.outcome.is_err()).count();
    println!("{} rows ({failed} failed) written to {}", reports.len(), out.display());
    Ok(())
}

fn emit(grid: &SimulationGrid, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for &process in &grid.processes {
        for &p in &grid.ps {
            for rep in 0..grid.reps {
                let seed = rep_seed(grid.seed, rep);
                let sim = generate(&SimConfig {
                    process,
                    p,
                    n_train: grid.n_train,
                    n_test: grid.n_test,
                    seed,
                })?;
                let stem = format!("{}_rep{rep}", simulation_id(process, p));
                write_dataset_csv(&sim.train, create_new(&dir.join(format!("{stem}_train.csv")))?)?;
                write_dataset_csv(&sim.test, create_new(&dir.join(format!("{stem}_test.csv")))?)?;
                if let Some(truth) = &sim.truth {
                    write_new(&dir.join(format!("{stem}_truth.json")), &model_to_json(truth))?;
                }
            }
        }
    }
    println!("data written to {}", dir.display());
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let data = load_csv(&a.data, &a.class)?;
    let s = dataset_stats(&data);
    println!("observations   {}", s.observations);
    println!("variables      {}", s.variables);
    match s.atomic_events {
        Some(n) => println!("atomic events  {n}"),
        None => println!("atomic events  (overflow)"),
    }
    println!("imbalance      {:.3}", s.imbalance);
    Ok(())
}
