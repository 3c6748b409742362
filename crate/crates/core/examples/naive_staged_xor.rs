//! On xor data naive Bayes cannot beat a coin flip, while a naive staged
//! tree with the same number of parameters recovers the signal.

use sevt::harness::{fit_learner, Learner, LearnerSettings, Structure};
use sevt::simgen::{generate, Process, SimConfig};
use sevt::{metrics, predict_dataset, Dag};

fn accuracy(model: &sevt::FittedClassifier, test: &sevt::Dataset) -> sevt::Result<f64> {
    let test = test.reorder_to(model.schema())?;
    let predicted: Vec<usize> = predict_dataset(model, &test)?.iter().map(|p| p.class).collect();
    Ok(metrics(&predicted, &test.class_labels())?.accuracy)
}

fn main() -> sevt::Result<()> {
    let sim = generate(&SimConfig {
        process: Process::Xor,
        p: 4,
        n_train: 1000,
        n_test: 1000,
        seed: 7,
    })?;
    let settings = LearnerSettings::default();

    let naive_dag = Dag::naive(sim.train.schema().clone());
    let naive_tree = sevt::convert::dag_to_staged_tree(&naive_dag)?;
    let naive = sevt::learn::fit_mle(&naive_tree, &sim.train, 1.0)?;
    let kmeans = fit_learner(Learner::NaiveKmeans, &sim.train, &settings, 7)?;
    let tan = fit_learner(Learner::Bnc(Structure::TanCl), &sim.train, &settings, 7)?;

    println!("xor, p = 4, 1000 train / 1000 test");
    println!(
        "naive Bayes        params {:>3}  accuracy {:.3}",
        naive.tree().free_parameter_count(),
        accuracy(&naive, &sim.test)?
    );
    println!(
        "naive staged tree  params {:>3}  accuracy {:.3}",
        kmeans.tree().free_parameter_count(),
        accuracy(&kmeans, &sim.test)?
    );
    println!(
        "Chow-Liu TAN       params {:>3}  accuracy {:.3}",
        tan.tree().free_parameter_count(),
        accuracy(&tan, &sim.test)?
    );
    Ok(())
}
