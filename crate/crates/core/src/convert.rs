//! Conversions between DAGs and staged trees, and class-membership checks
//! of staged tree classifiers.

use std::fmt;

use serde::Serialize;

use crate::dag::{Dag, StructureViolation};
use crate::error::Result;
use crate::tree::StagedTree;

/// The staged tree of a BN: two depth-`k` vertices share a stage iff their
/// contexts agree on the parents of variable `k`.
pub fn dag_to_staged_tree(g: &Dag) -> Result<StagedTree> {
    let schema = g.schema();
    let cards = schema.cardinalities();
    StagedTree::from_fn(schema.clone(), |depth, ctx| {
        let codes = schema.context_codes(depth, ctx);
        g.parents(depth)
            .iter()
            .fold(0usize, |acc, &p| acc * cards[p] + codes[p]) as u32
    })
}

/// The sparsest DAG whose model contains the staged tree's model:
/// `j` is a parent of `i` iff two depth-`i` contexts differing only in `x_j`
/// sit in different stages.
pub fn minimal_dag(t: &StagedTree) -> Dag {
    let schema = t.schema();
    let n = t.depths();
    let mut parents = vec![Vec::new(); n];
    for (i, ps) in parents.iter_mut().enumerate().skip(1) {
        let labels = t.labels(i);
        for j in 0..i {
            let card = schema.cardinality(j);
            if card < 2 {
                continue;
            }
            let stride: usize = (j + 1..i).map(|l| schema.cardinality(l)).product();
            let depends = labels.iter().enumerate().any(|(ctx, &s)| {
                let xj = (ctx / stride) % card;
                xj != 0 && labels[ctx - xj * stride] != s
            });
            if depends {
                ps.push(j);
            }
        }
    }
    Dag::new(schema.clone(), parents).expect("parents precede children by construction")
}

/// Max in-degree of the minimal DAG is at most `k`.
pub fn is_k_parents(t: &StagedTree, k: usize) -> bool {
    minimal_dag(t).max_in_degree() <= k
}

/// The minimal DAG is a k-DB classifier structure.
pub fn is_kdb_refinement(t: &StagedTree, k: usize) -> bool {
    minimal_dag(t).is_kdb_structure(k)
}

/// The minimal DAG is a TAN classifier structure.
pub fn is_tan_refinement(t: &StagedTree) -> bool {
    minimal_dag(t).is_tan_structure()
}

/// Summary of where a staged tree classifier sits among the BNC families.
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    /// Minimal-DAG edges as (parent, child) variable names.
    pub minimal_dag_edges: Vec<(String, String)>,
    pub max_in_degree: usize,
    /// Whether the class is a parent of every feature in the minimal DAG.
    pub class_parent_of_all: bool,
    /// Smallest k for which the tree is a k-DB refinement, if any.
    pub kdb_k: Option<usize>,
    pub tan: bool,
    /// Violations of the TAN family (empty when `tan`).
    pub tan_violations: Vec<String>,
}

pub fn membership_report(t: &StagedTree) -> MembershipReport {
    membership_of_dag(&minimal_dag(t))
}

/// The same report for a DAG read directly as a BNC.
pub fn membership_of_dag(g: &Dag) -> MembershipReport {
    let bnc = g.bnc_violations(usize::MAX);
    let class_parent_of_all = bnc.is_empty();
    let kdb_k = class_parent_of_all.then(|| {
        (1..g.schema().n_vars())
            .map(|v| g.feature_parents(v).count())
            .max()
            .unwrap_or(0)
    });
    let tan_violations: Vec<StructureViolation> = g.tan_violations();
    MembershipReport {
        minimal_dag_edges: g.named_edges().into_iter().collect(),
        max_in_degree: g.max_in_degree(),
        class_parent_of_all,
        kdb_k,
        tan: tan_violations.is_empty(),
        tan_violations: tan_violations.iter().map(ToString::to_string).collect(),
    }
}

impl fmt::Display for MembershipReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "minimal DAG edges: {}", self.minimal_dag_edges.len())?;
        for (p, c) in &self.minimal_dag_edges {
            writeln!(f, "  {p} -> {c}")?;
        }
        writeln!(
            f,
            "max in-degree: {} ({}-parents staged tree)",
            self.max_in_degree, self.max_in_degree
        )?;
        match self.kdb_k {
            Some(k) => writeln!(f, "k-DB refinement for every k >= {k}")?,
            None => writeln!(f, "not a BNC refinement: some feature does not depend on the class")?,
        }
        if self.tan {
            writeln!(f, "TAN refinement: yes")
        } else {
            writeln!(f, "TAN refinement: no")?;
            for v in &self.tan_violations {
                writeln!(f, "  {v}")?;
            }
            Ok(())
        }
    }
}
