//! Refine a Chow-Liu TAN into a sparser staged tree by backward
//! hill-climbing on BIC and show every accepted merge.

use std::path::Path;

use sevt::bnc::chow_liu_tan;
use sevt::convert::{dag_to_staged_tree, is_tan_refinement, membership_report};
use sevt::harness::load_csv;
use sevt::learn::{backward_hill_climb_traced, bic_score, fit_mle, ScoreConfig};

fn main() -> sevt::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/monks1.csv");
    let data = load_csv(&path, "class")?;
    let tan = chow_liu_tan(&data)?;
    println!("Chow-Liu TAN feature edges:");
    for (p, c) in tan.named_edges() {
        if p != "class" {
            println!("  {p} -> {c}");
        }
    }

    let data = data.reorder_to(tan.schema())?;
    let start = dag_to_staged_tree(&tan)?;
    let outcome = backward_hill_climb_traced(&start, &data, &ScoreConfig::default())?;
    println!("\n{} merges accepted", outcome.steps.len());
    for s in outcome.steps.iter().take(10) {
        println!("  merge {} into {}  (BIC change {:.2})", s.absorbed, s.kept, s.delta);
    }
    if outcome.steps.len() > 10 {
        println!("  ...");
    }

    let before = fit_mle(&start, &data, 1.0)?;
    let after = fit_mle(&outcome.tree, &data, 1.0)?;
    println!(
        "\nstages {} -> {}, BIC {:.1} -> {:.1}",
        start.total_stages(),
        outcome.tree.total_stages(),
        bic_score(&before, &data)?,
        bic_score(&after, &data)?
    );
    println!("still a TAN refinement: {}", is_tan_refinement(&outcome.tree));
    print!("{}", membership_report(&outcome.tree));
    Ok(())
}
