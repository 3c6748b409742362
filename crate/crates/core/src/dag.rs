//! DAGs over the schema variables, with the class at index 0.
//!
//! Parent lists always point backwards in the schema order, so the schema
//! order is a topological order of every `Dag`.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::schema::CategoricalSchema;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    schema: Arc<CategoricalSchema>,
    parents: Vec<Vec<usize>>,
}

impl Dag {
    /// `parents[i]` must only hold indices `< i`. Lists are sorted and deduplicated.
    pub fn new(schema: Arc<CategoricalSchema>, parents: Vec<Vec<usize>>) -> Result<Self> {
        if parents.len() != schema.n_vars() {
            return Err(Error::Domain(format!(
                "{} parent sets for {} variables",
                parents.len(),
                schema.n_vars()
            )));
        }
        let mut sorted = Vec::with_capacity(parents.len());
        for (child, ps) in parents.into_iter().enumerate() {
            let set: BTreeSet<usize> = ps.into_iter().collect();
            if let Some(&bad) = set.iter().find(|&&p| p >= child) {
                return Err(Error::Domain(format!(
                    "parent {bad} of variable {child} does not precede it in the ordering"
                )));
            }
            sorted.push(set.into_iter().collect());
        }
        Ok(Dag {
            schema,
            parents: sorted,
        })
    }

    /// No edges at all.
    pub fn empty(schema: Arc<CategoricalSchema>) -> Self {
        let n = schema.n_vars();
        Dag {
            schema,
            parents: vec![Vec::new(); n],
        }
    }

    /// Naive Bayes structure: the class is the only parent of each feature.
    pub fn naive(schema: Arc<CategoricalSchema>) -> Self {
        let n = schema.n_vars();
        let parents = (0..n).map(|i| if i == 0 { vec![] } else { vec![0] }).collect();
        Dag { schema, parents }
    }

    /// Builds a DAG from parent sets expressed in `base` indices that need
    /// not respect the base ordering. The variables are reordered by a stable
    /// topological sort (smallest base index first among ready variables) and
    /// the result lives on that reordered schema.
    pub fn from_unordered(base: &Arc<CategoricalSchema>, parents: &[BTreeSet<usize>]) -> Result<Self> {
        let n = base.n_vars();
        if parents.len() != n {
            return Err(Error::Domain("parent set count mismatch".into()));
        }
        if !parents[0].is_empty() {
            return Err(Error::Domain("the class cannot have parents".into()));
        }
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n).find(|&v| !placed[v] && parents[v].iter().all(|&p| placed[p]));
            let Some(v) = next else {
                return Err(Error::Domain("parent sets contain a cycle".into()));
            };
            placed[v] = true;
            order.push(v);
        }
        if order[0] != 0 {
            return Err(Error::Domain("the class must come first".into()));
        }
        let mut position = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            position[v] = k;
        }
        let schema = if order.iter().enumerate().all(|(k, &v)| k == v) {
            Arc::clone(base)
        } else {
            Arc::new(base.permuted(&order)?)
        };
        let new_parents = order
            .iter()
            .map(|&v| parents[v].iter().map(|&p| position[p]).collect())
            .collect();
        Dag::new(schema, new_parents)
    }

    pub fn schema(&self) -> &Arc<CategoricalSchema> {
        &self.schema
    }

    pub fn parents(&self, var: usize) -> &[usize] {
        &self.parents[var]
    }

    pub fn parent_sets(&self) -> &[Vec<usize>] {
        &self.parents
    }

    /// Parents of `var` other than the class.
    pub fn feature_parents(&self, var: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[var].iter().copied().filter(|&p| p != 0)
    }

    /// All edges as `(parent, child)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edges as `(parent name, child name)`, independent of the ordering.
    pub fn named_edges(&self) -> BTreeSet<(String, String)> {
        self.edges()
            .into_iter()
            .map(|(p, c)| {
                (
                    self.schema.variable(p).name.clone(),
                    self.schema.variable(c).name.clone(),
                )
            })
            .collect()
    }

    /// Reasons this DAG is not a BNC whose features have at most
    /// `max_feature_parents` feature parents. Empty when it is one.
    pub fn bnc_violations(&self, max_feature_parents: usize) -> Vec<StructureViolation> {
        let mut out = Vec::new();
        for var in 1..self.schema.n_vars() {
            let name = || self.schema.variable(var).name.clone();
            if !self.parents[var].contains(&0) {
                out.push(StructureViolation::MissingClassParent(name()));
            }
            let fp = self.feature_parents(var).count();
            if fp > max_feature_parents {
                out.push(StructureViolation::TooManyFeatureParents {
                    feature: name(),
                    count: fp,
                    limit: max_feature_parents,
                });
            }
        }
        out
    }

    pub fn is_kdb_structure(&self, k: usize) -> bool {
        self.bnc_violations(k).is_empty()
    }

    /// TAN: a BNC whose feature-feature edges form one directed spanning tree.
    pub fn is_tan_structure(&self) -> bool {
        self.tan_violations().is_empty()
    }

    pub fn tan_violations(&self) -> Vec<StructureViolation> {
        let mut out = self.bnc_violations(1);
        let p = self.schema.n_features();
        let ff: usize = (1..self.schema.n_vars()).map(|v| self.feature_parents(v).count()).sum();
        if out.is_empty() && p > 0 && ff != p - 1 {
            out.push(StructureViolation::NotSpanningTree { edges: ff, features: p });
        }
        out
    }
}

/// Why a DAG falls outside a BNC family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureViolation {
    MissingClassParent(String),
    TooManyFeatureParents {
        feature: String,
        count: usize,
        limit: usize,
    },
    NotSpanningTree {
        edges: usize,
        features: usize,
    },
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureViolation::MissingClassParent(v) => {
                write!(f, "feature `{v}` does not depend on the class")
            }
            StructureViolation::TooManyFeatureParents { feature, count, limit } => {
                write!(f, "feature `{feature}` has {count} feature parents (limit {limit})")
            }
            StructureViolation::NotSpanningTree { edges, features } => write!(
                f,
                "{edges} feature-feature edges over {features} features do not form a spanning tree"
            ),
        }
    }
}
