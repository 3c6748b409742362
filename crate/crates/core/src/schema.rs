//! Categorical variables, their ordering, and integer-coded datasets.
//!
//! Variable 0 is always the class. The remaining variables are features in
//! the order the tree visits them; that order is part of the schema, so two
//! schemas with the same variables in different orders are different
//! schemas.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single categorical variable. Codes are positions in `levels`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub levels: Vec<String>,
}

impl Variable {
    /// A variable whose levels are the decimal codes `0..cardinality`.
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Variable {
            name: name.into(),
            levels: (0..cardinality).map(|c| c.to_string()).collect(),
        }
    }

    pub fn with_levels(name: impl Into<String>, levels: Vec<String>) -> Self {
        Variable {
            name: name.into(),
            levels,
        }
    }

    pub fn cardinality(&self) -> usize {
        self.levels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalSchema {
    variables: Vec<Variable>,
}

impl CategoricalSchema {
    /// Builds a schema. The first variable is the class and needs at least
    /// two levels; features need at least one. Names must be unique.
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let Some(class) = variables.first() else {
            return Err(Error::InvalidSchema("no variables".into()));
        };
        if class.cardinality() < 2 {
            return Err(Error::InvalidSchema(format!(
                "class `{}` needs at least 2 levels, has {}",
                class.name,
                class.cardinality()
            )));
        }
        let mut seen = HashSet::new();
        for v in &variables {
            if v.cardinality() == 0 {
                return Err(Error::InvalidSchema(format!("variable `{}` has no levels", v.name)));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate variable name `{}`", v.name)));
            }
            let distinct: HashSet<&str> = v.levels.iter().map(String::as_str).collect();
            if distinct.len() != v.levels.len() {
                return Err(Error::InvalidSchema(format!(
                    "variable `{}` has duplicate levels",
                    v.name
                )));
            }
        }
        Ok(CategoricalSchema { variables })
    }

    /// Convenience constructor: class first, then features, with numeric levels.
    pub fn from_cardinalities(cards: &[usize]) -> Result<Self> {
        let vars = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let name = if i == 0 { "C".to_string() } else { format!("X{i}") };
                Variable::new(name, c)
            })
            .collect();
        Self::new(vars)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, index: usize) -> &Variable {
        &self.variables[index]
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// Number of features (all variables except the class).
    pub fn n_features(&self) -> usize {
        self.variables.len() - 1
    }

    pub fn cardinality(&self, index: usize) -> usize {
        self.variables[index].cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    pub fn class_cardinality(&self) -> usize {
        self.variables[0].cardinality()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Number of contexts (tree vertices) at `depth`: the product of the
    /// first `depth` cardinalities. `None` on overflow.
    pub fn vertex_count(&self, depth: usize) -> Option<usize> {
        self.variables[..depth]
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.cardinality()))
    }

    /// Size of the joint sample space, i.e. the number of tree leaves.
    pub fn atomic_event_count(&self) -> Option<usize> {
        self.vertex_count(self.variables.len())
    }

    /// The same variables visited in a different order. `order[k]` is the
    /// current index of the variable placed at position `k`; the class must
    /// stay first.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_vars() || order.first() != Some(&0) {
            return Err(Error::Domain("permutation must keep the class first".into()));
        }
        let mut seen = vec![false; order.len()];
        for &i in order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Domain("not a permutation".into()));
            }
        }
        Self::new(order.iter().map(|&i| self.variables[i].clone()).collect())
    }

    /// Mixed-radix index of a context prefix; the first variable is the most
    /// significant digit, so index order equals lexicographic prefix order.
    pub fn context_index(&self, prefix: &[usize]) -> usize {
        prefix
            .iter()
            .zip(&self.variables)
            .fold(0, |acc, (&x, v)| acc * v.cardinality() + x)
    }

    /// Inverse of [`context_index`](Self::context_index) for a prefix of
    /// length `depth`.
    pub fn context_codes(&self, depth: usize, mut index: usize) -> Vec<usize> {
        let mut codes = vec![0; depth];
        for k in (0..depth).rev() {
            let c = self.cardinality(k);
            codes[k] = index % c;
            index /= c;
        }
        codes
    }

    pub fn check_code(&self, var: usize, code: usize) -> Result<()> {
        let c = self.cardinality(var);
        if code >= c {
            return Err(Error::InvalidCode {
                variable: self.variables[var].name.clone(),
                code,
                cardinality: c,
            });
        }
        Ok(())
    }

    /// Validates a full row (class first).
    pub fn check_row(&self, row: &[usize]) -> Result<()> {
        if row.len() != self.n_vars() {
            return Err(Error::RowWidth {
                expected: self.n_vars(),
                got: row.len(),
            });
        }
        row.iter()
            .enumerate()
            .try_for_each(|(i, &code)| self.check_code(i, code))
    }
}

/// Integer-coded records over a schema, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<CategoricalSchema>,
    codes: Vec<usize>,
}

impl Dataset {
    pub fn new(schema: Arc<CategoricalSchema>, rows: &[Vec<usize>]) -> Result<Self> {
        let mut codes = Vec::with_capacity(rows.len() * schema.n_vars());
        for row in rows {
            schema.check_row(row)?;
            codes.extend_from_slice(row);
        }
        Ok(Dataset { schema, codes })
    }

    pub fn from_flat(schema: Arc<CategoricalSchema>, codes: Vec<usize>) -> Result<Self> {
        let w = schema.n_vars();
        if !codes.len().is_multiple_of(w) {
            return Err(Error::RowWidth {
                expected: w,
                got: codes.len() % w,
            });
        }
        for row in codes.chunks_exact(w) {
            schema.check_row(row)?;
        }
        Ok(Dataset { schema, codes })
    }

    pub fn schema(&self) -> &Arc<CategoricalSchema> {
        &self.schema
    }

    pub fn n_records(&self) -> usize {
        self.codes.len() / self.schema.n_vars()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        let w = self.schema.n_vars();
        &self.codes[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, usize> {
        self.codes.chunks_exact(self.schema.n_vars())
    }

    pub fn class_labels(&self) -> Vec<usize> {
        self.rows().map(|r| r[0]).collect()
    }

    /// Per-level counts of one variable.
    pub fn value_counts(&self, var: usize) -> Vec<usize> {
        let mut counts = vec![0; self.schema.cardinality(var)];
        for r in self.rows() {
            counts[r[var]] += 1;
        }
        counts
    }

    /// The records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut codes = Vec::with_capacity(indices.len() * self.schema.n_vars());
        for &i in indices {
            codes.extend_from_slice(self.row(i));
        }
        Dataset {
            schema: Arc::clone(&self.schema),
            codes,
        }
    }

    /// Re-expresses the records over `target`, which must hold the same
    /// variables (matched by name, same levels) possibly in another order.
    pub fn reorder_to(&self, target: &Arc<CategoricalSchema>) -> Result<Dataset> {
        if Arc::ptr_eq(&self.schema, target) || *self.schema == **target {
            return Ok(Dataset {
                schema: Arc::clone(target),
                codes: self.codes.clone(),
            });
        }
        let map = column_mapping(&self.schema, target)?;
        let mut codes = Vec::with_capacity(self.codes.len());
        for r in self.rows() {
            codes.extend(map.iter().map(|&src| r[src]));
        }
        Ok(Dataset {
            schema: Arc::clone(target),
            codes,
        })
    }
}

/// For each variable of `target`, its index in `source`.
pub(crate) fn column_mapping(source: &CategoricalSchema, target: &CategoricalSchema) -> Result<Vec<usize>> {
    if source.n_vars() != target.n_vars() {
        return Err(Error::Domain(format!(
            "schemas differ in size ({} vs {})",
            source.n_vars(),
            target.n_vars()
        )));
    }
    target
        .variables()
        .iter()
        .map(|v| {
            let src = source
                .index_of(&v.name)
                .ok_or_else(|| Error::Domain(format!("variable `{}` missing", v.name)))?;
            if source.variable(src).levels != v.levels {
                return Err(Error::Domain(format!("levels of `{}` differ", v.name)));
            }
            Ok(src)
        })
        .collect()
}
