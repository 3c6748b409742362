//! Moving between Bayesian networks and staged trees: the staged tree of a
//! DAG, the minimal DAG of a staging, and BNC family membership.

use std::collections::BTreeSet;
use std::sync::Arc;

use sevt::convert::{dag_to_staged_tree, membership_report, minimal_dag};
use sevt::{CategoricalSchema, Dag, StageId, StagedTree};

fn print_staging(t: &StagedTree) {
    for d in 0..t.depths() {
        let groups: Vec<String> = t
            .members(d)
            .iter()
            .map(|m| format!("{{{}}}", m.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        println!("  depth {d} ({}): {}", t.schema().variable(d).name, groups.join(" "));
    }
}

fn main() -> sevt::Result<()> {
    // the fork X2 <- X1 -> X3 on binary variables; the root takes the
    // first (class) position, named C here
    let schema = Arc::new(CategoricalSchema::from_cardinalities(&[2, 2, 2])?);
    let fork = Dag::from_unordered(&schema, &[BTreeSet::new(), BTreeSet::from([0]), BTreeSet::from([0])])?;
    let tree = dag_to_staged_tree(&fork)?;
    println!("staged tree of the fork DAG (vertices are context indices):");
    print_staging(&tree);
    let back = minimal_dag(&tree);
    println!("minimal DAG edges: {:?}", back.named_edges());
    assert_eq!(back, fork);

    // naive Bayes on four features plus the edge X2 -> X3
    let schema = Arc::new(CategoricalSchema::from_cardinalities(&[2, 2, 2, 2, 2])?);
    let mut parents = vec![BTreeSet::new(); 5];
    for ps in parents.iter_mut().skip(1) {
        ps.insert(0);
    }
    parents[3].insert(2);
    let kdb = Dag::from_unordered(&schema, &parents)?;
    let tree = dag_to_staged_tree(&kdb)?;
    println!("\nnaive Bayes plus X2 -> X3:\n{}", membership_report(&tree));

    // merging the two C = 0 stages of X3 makes X3 independent of X2 given
    // C = 0 only; the dependence remains under C = 1, so the edge stays
    let merged = tree.merge(StageId { depth: 3, index: 0 }, StageId { depth: 3, index: 1 })?;
    println!("after a context-specific merge at depth 3:");
    print_staging(&merged);
    println!("{}", membership_report(&merged));
    Ok(())
}
