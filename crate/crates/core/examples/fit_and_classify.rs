//! Fit a BNC and its staged-tree refinement on the titanic data, compare
//! them on a held-out split, and save the refined model as JSON.

use std::path::Path;

use sevt::harness::{dataset_stats, fit_learner, load_csv, train_test_split, Learner, LearnerSettings};
use sevt::serial::{model_from_json, model_to_json};
use sevt::{metrics, predict, predict_dataset};

fn main() -> sevt::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/titanic.csv");
    let data = load_csv(&path, "Survived")?;
    let stats = dataset_stats(&data);
    println!(
        "titanic: {} records, {} variables, imbalance {:.3}",
        stats.observations, stats.variables, stats.imbalance
    );

    let (train, test) = train_test_split(&data, 0.8, 42)?;
    let settings = LearnerSettings::default();
    for id in ["bnc_tan_cl", "sevt_tan_cl"] {
        let learner: Learner = id.parse()?;
        let model = fit_learner(learner, &train, &settings, 42)?;
        let test = test.reorder_to(model.schema())?;
        let predicted: Vec<usize> = predict_dataset(&model, &test)?.iter().map(|p| p.class).collect();
        let m = metrics(&predicted, &test.class_labels())?;
        println!(
            "{id:<12} stages {:>2}  free parameters {:>2}  accuracy {:.3}  balanced accuracy {:.3}",
            model.tree().total_stages(),
            model.tree().free_parameter_count(),
            m.accuracy,
            m.balanced_accuracy
        );

        if learner == Learner::Sevt(sevt::harness::Structure::TanCl) {
            let schema = model.schema();
            // a first-class adult woman, in the model's feature order
            let names = ["Class", "Sex", "Age"];
            let values = ["1st", "Female", "Adult"];
            let mut features = vec![0; schema.n_features()];
            for (name, value) in names.iter().zip(values) {
                let v = schema.index_of(name).unwrap();
                features[v - 1] = schema.variable(v).levels.iter().position(|l| l == value).unwrap();
            }
            let p = predict(&model, &features)?;
            println!("  P(Survived = Yes | 1st, Female, Adult) = {:.3}", p.posterior[1]);

            let json = model_to_json(&model);
            let back = model_from_json(&json)?;
            assert_eq!(predict(&back, &features)?, p);
            println!("  model JSON: {} bytes, reloads to identical predictions", json.len());
        }
    }
    Ok(())
}
