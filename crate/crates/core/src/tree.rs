//! Staged trees, their stage parameters, and fitted classifiers.
//!
//! A vertex at depth `k` is the context `x_[k]` (values of the first `k`
//! variables) and is addressed by its mixed-radix index, see
//! [`CategoricalSchema::context_index`]. The tree is never materialized as a
//! node list: each depth stores only a stage label per context. Vertices at
//! depth `k` emit the edges of variable `k`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::CategoricalSchema;

/// Upper bound on the total number of internal vertices of a tree.
pub const MAX_INTERNAL_VERTICES: usize = 1 << 24;

/// Simplex tolerance for stage probability vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Opaque stage identifier. Stages at different depths never share an id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StageId {
    pub depth: usize,
    pub index: u32,
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.depth, self.index)
    }
}

impl FromStr for StageId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Document(format!("bad stage id `{s}`"));
        let (d, i) = s.split_once(':').ok_or_else(bad)?;
        Ok(StageId {
            depth: d.parse().map_err(|_| bad())?,
            index: i.parse().map_err(|_| bad())?,
        })
    }
}

/// An X-compatible staged tree: the event tree of the schema plus a
/// partition of each depth's vertices into stages.
///
/// Stage labels are kept canonical (numbered by first appearance in context
/// order), so two trees compare equal exactly when their stagings are the
/// same partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagedTree {
    schema: Arc<CategoricalSchema>,
    stages: Vec<Vec<u32>>,
    n_stages: Vec<usize>,
}

fn checked_vertex_counts(schema: &CategoricalSchema) -> Result<Vec<usize>> {
    let mut total = 0usize;
    let mut counts = Vec::with_capacity(schema.n_vars());
    for depth in 0..schema.n_vars() {
        let c = schema.vertex_count(depth).ok_or(Error::TreeTooLarge(usize::MAX))?;
        total = total.saturating_add(c);
        if total > MAX_INTERNAL_VERTICES {
            return Err(Error::TreeTooLarge(total));
        }
        counts.push(c);
    }
    Ok(counts)
}

fn canonicalize(labels: &[u32]) -> (Vec<u32>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len() as u32;
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Every internal vertex in its own stage.
pub fn full_tree(schema: Arc<CategoricalSchema>) -> Result<StagedTree> {
    StagedTree::full(schema)
}

impl StagedTree {
    pub fn full(schema: Arc<CategoricalSchema>) -> Result<Self> {
        let counts = checked_vertex_counts(&schema)?;
        let stages = counts.iter().map(|&c| (0..c as u32).collect()).collect();
        Ok(StagedTree {
            schema,
            stages,
            n_stages: counts,
        })
    }

    /// One stage per depth.
    pub fn fully_merged(schema: Arc<CategoricalSchema>) -> Result<Self> {
        let counts = checked_vertex_counts(&schema)?;
        let stages = counts.iter().map(|&c| vec![0; c]).collect();
        Ok(StagedTree {
            schema,
            stages,
            n_stages: vec![1; counts.len()],
        })
    }

    /// Builds a tree from arbitrary per-depth labels; `labels[k][ctx]` is the
    /// label of context `ctx` at depth `k`. Labels are only compared for
    /// equality within a depth.
    pub fn from_labels(schema: Arc<CategoricalSchema>, labels: Vec<Vec<u32>>) -> Result<Self> {
        let counts = checked_vertex_counts(&schema)?;
        if labels.len() != counts.len() {
            return Err(Error::Domain(format!(
                "{} depths of labels for {} variables",
                labels.len(),
                counts.len()
            )));
        }
        let mut stages = Vec::with_capacity(labels.len());
        let mut n_stages = Vec::with_capacity(labels.len());
        for (depth, (l, &c)) in labels.iter().zip(&counts).enumerate() {
            if l.len() != c {
                return Err(Error::Domain(format!(
                    "depth {depth} has {} labels for {c} vertices",
                    l.len()
                )));
            }
            let (canon, m) = canonicalize(l);
            stages.push(canon);
            n_stages.push(m);
        }
        Ok(StagedTree {
            schema,
            stages,
            n_stages,
        })
    }

    /// Labels computed per `(depth, context index)`.
    pub fn from_fn(schema: Arc<CategoricalSchema>, mut label: impl FnMut(usize, usize) -> u32) -> Result<Self> {
        let counts = checked_vertex_counts(&schema)?;
        let labels = counts
            .iter()
            .enumerate()
            .map(|(d, &c)| (0..c).map(|ctx| label(d, ctx)).collect())
            .collect();
        Self::from_labels(schema, labels)
    }

    pub fn schema(&self) -> &Arc<CategoricalSchema> {
        &self.schema
    }

    /// Number of depths carrying internal vertices (= number of variables).
    pub fn depths(&self) -> usize {
        self.stages.len()
    }

    pub fn vertex_count(&self, depth: usize) -> usize {
        self.stages[depth].len()
    }

    pub fn leaf_count(&self) -> usize {
        self.stages
            .last()
            .map_or(1, |l| l.len() * self.schema.cardinality(self.depths() - 1))
    }

    /// Canonical stage labels of all vertices at `depth`, by context index.
    pub fn labels(&self, depth: usize) -> &[u32] {
        &self.stages[depth]
    }

    pub fn n_stages(&self, depth: usize) -> usize {
        self.n_stages[depth]
    }

    pub fn total_stages(&self) -> usize {
        self.n_stages.iter().sum()
    }

    pub fn stage_of(&self, depth: usize, context: usize) -> StageId {
        StageId {
            depth,
            index: self.stages[depth][context],
        }
    }

    /// Stage of the vertex reached by the prefix `codes`.
    pub fn stage_of_context(&self, codes: &[usize]) -> Result<StageId> {
        if codes.len() >= self.depths() {
            return Err(Error::Domain("a leaf has no stage".into()));
        }
        for (i, &c) in codes.iter().enumerate() {
            self.schema.check_code(i, c)?;
        }
        Ok(self.stage_of(codes.len(), self.schema.context_index(codes)))
    }

    pub fn stage_ids(&self) -> impl Iterator<Item = StageId> + '_ {
        self.n_stages
            .iter()
            .enumerate()
            .flat_map(|(depth, &m)| (0..m as u32).map(move |index| StageId { depth, index }))
    }

    /// Context indices of the members of every stage at `depth`.
    pub fn members(&self, depth: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_stages[depth]];
        for (ctx, &s) in self.stages[depth].iter().enumerate() {
            out[s as usize].push(ctx);
        }
        out
    }

    /// Σ over stages of (cardinality of the emitted variable − 1).
    pub fn free_parameter_count(&self) -> usize {
        self.n_stages
            .iter()
            .enumerate()
            .map(|(d, &m)| m * (self.schema.cardinality(d) - 1))
            .sum()
    }

    /// Joins two stages of the same depth.
    pub fn merge(&self, a: StageId, b: StageId) -> Result<StagedTree> {
        if a.depth != b.depth {
            return Err(Error::Domain(format!("cannot merge stages {a} and {b} across depths")));
        }
        let d = a.depth;
        if d >= self.depths() || a.index as usize >= self.n_stages[d] || b.index as usize >= self.n_stages[d] {
            return Err(Error::Domain(format!("unknown stage {a} or {b}")));
        }
        let mut labels = self.stages.clone();
        for l in labels[d].iter_mut() {
            if *l == b.index {
                *l = a.index;
            }
        }
        Self::from_labels(Arc::clone(&self.schema), labels)
    }

    /// True when every stage of `self` is a union of stages of `finer`.
    pub fn is_coarsening_of(&self, finer: &StagedTree) -> bool {
        if self.schema != finer.schema {
            return false;
        }
        (0..self.depths()).all(|d| {
            let mut image = vec![None; finer.n_stages[d]];
            finer.stages[d].iter().zip(&self.stages[d]).all(|(&f, &c)| {
                let slot = &mut image[f as usize];
                match *slot {
                    None => {
                        *slot = Some(c);
                        true
                    }
                    Some(prev) => prev == c,
                }
            })
        })
    }
}

/// One probability vector per stage, over the outcomes of that depth's variable.
#[derive(Debug, Clone, PartialEq)]
pub struct StageParameters {
    // per depth: n_stages * cardinality, row-major by stage
    probs: Vec<Vec<f64>>,
    cards: Vec<usize>,
}

impl StageParameters {
    /// Uniform vectors everywhere.
    pub fn uniform(tree: &StagedTree) -> Self {
        Self::from_fn(tree, |id| {
            let c = tree.schema.cardinality(id.depth);
            vec![1.0 / c as f64; c]
        })
        .expect("uniform vectors are valid")
    }

    /// Vectors computed per stage.
    pub fn from_fn(tree: &StagedTree, mut f: impl FnMut(StageId) -> Vec<f64>) -> Result<Self> {
        let cards = tree.schema.cardinalities();
        let mut probs = Vec::with_capacity(tree.depths());
        for (depth, &c) in cards.iter().enumerate() {
            let mut flat = Vec::with_capacity(tree.n_stages(depth) * c);
            for index in 0..tree.n_stages(depth) as u32 {
                let v = f(StageId { depth, index });
                if v.len() != c {
                    return Err(Error::Domain(format!(
                        "stage {depth}:{index} vector has length {}, expected {c}",
                        v.len()
                    )));
                }
                flat.extend(v);
            }
            probs.push(flat);
        }
        let out = StageParameters { probs, cards };
        out.validate()?;
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        for (depth, flat) in self.probs.iter().enumerate() {
            for (index, v) in flat.chunks_exact(self.cards[depth]).enumerate() {
                let sum: f64 = v.iter().sum();
                let bad_entry = v.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan());
                if bad_entry || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                    return Err(Error::Domain(format!(
                        "stage {depth}:{index} vector {v:?} is not a probability vector"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: StageId) -> &[f64] {
        let c = self.cards[id.depth];
        let start = id.index as usize * c;
        &self.probs[id.depth][start..start + c]
    }

    pub fn n_stages(&self, depth: usize) -> usize {
        self.probs[depth].len() / self.cards[depth]
    }

    fn covers(&self, tree: &StagedTree) -> bool {
        self.cards == tree.schema.cardinalities() && (0..tree.depths()).all(|d| self.n_stages(d) == tree.n_stages(d))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub learner: String,
    pub seed: Option<u64>,
}

/// A staged tree with fitted stage parameters. Immutable once built.
#[derive(Debug, Clone)]
pub struct FittedClassifier {
    tree: StagedTree,
    params: StageParameters,
    log_params: Vec<Vec<f64>>,
    smoothing: f64,
    metadata: ModelMetadata,
}

impl FittedClassifier {
    pub fn new(tree: StagedTree, params: StageParameters, smoothing: f64, metadata: ModelMetadata) -> Result<Self> {
        if !params.covers(&tree) {
            return Err(Error::Domain("parameters do not cover the tree's stages".into()));
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::Domain(format!("invalid smoothing {smoothing}")));
        }
        let log_params = params
            .probs
            .iter()
            .map(|v| v.iter().map(|p| p.ln()).collect())
            .collect();
        Ok(FittedClassifier {
            tree,
            params,
            log_params,
            smoothing,
            metadata,
        })
    }

    pub fn tree(&self) -> &StagedTree {
        &self.tree
    }

    pub fn params(&self) -> &StageParameters {
        &self.params
    }

    pub fn schema(&self) -> &Arc<CategoricalSchema> {
        self.tree.schema()
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    /// Product of the stage parameters along the root-to-leaf path of `row`.
    pub fn joint_probability(&self, row: &[usize]) -> Result<f64> {
        Ok(self.log_joint(row)?.exp())
    }

    /// Natural log of [`joint_probability`](Self::joint_probability);
    /// `-inf` when some edge on the path has probability zero.
    pub fn log_joint(&self, row: &[usize]) -> Result<f64> {
        self.schema().check_row(row)?;
        Ok(self.log_joint_unchecked(row))
    }

    pub(crate) fn log_joint_unchecked(&self, row: &[usize]) -> f64 {
        let schema = self.tree.schema();
        let mut ctx = 0usize;
        let mut acc = 0.0;
        for (depth, &x) in row.iter().enumerate() {
            let c = schema.cardinality(depth);
            let stage = self.tree.stages[depth][ctx] as usize;
            acc += self.log_params[depth][stage * c + x];
            ctx = ctx * c + x;
        }
        acc
    }

    /// Log joint of every class value with the given features (row without
    /// the class), computed with one shared suffix walk per class.
    pub(crate) fn class_log_joints(&self, features: &[usize], out: &mut Vec<f64>) {
        let schema = self.tree.schema();
        out.clear();
        for class in 0..schema.class_cardinality() {
            let mut acc = self.log_params[0][self.tree.stages[0][0] as usize * schema.class_cardinality() + class];
            let mut ctx = class;
            for (i, &x) in features.iter().enumerate() {
                let depth = i + 1;
                let c = schema.cardinality(depth);
                let stage = self.tree.stages[depth][ctx] as usize;
                acc += self.log_params[depth][stage * c + x];
                ctx = ctx * c + x;
            }
            out.push(acc);
        }
    }
}
