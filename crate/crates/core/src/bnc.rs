//! Bayesian network classifier structure learning: Chow-Liu TAN, k-DB by
//! mutual information, and greedy search on cross-validated accuracy.
//!
//! Learners work with parent sets indexed by the dataset's own columns and
//! return a [`Dag`] whose schema is a topological reordering of the
//! dataset's schema (see [`Dag::from_unordered`]).

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts::{class_mutual_information, cmi_from_table, ContingencyCounts};
use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::schema::{column_mapping, CategoricalSchema, Dataset};

type ParentSets = Vec<BTreeSet<usize>>;

fn naive_parents(p: usize) -> ParentSets {
    (0..=p)
        .map(|v| if v == 0 { BTreeSet::new() } else { BTreeSet::from([0]) })
        .collect()
}

fn require_records(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        Err(Error::EmptyDataset)
    } else {
        Ok(())
    }
}

/// Pairwise I(X_i; X_j | C) for all features, indexed by column.
#[allow(clippy::needless_range_loop)]
pub fn cmi_matrix(data: &Dataset) -> Result<Vec<Vec<f64>>> {
    require_records(data)?;
    let n = data.schema().n_vars();
    let mut w = vec![vec![0.0; n]; n];
    for i in 1..n {
        for j in i + 1..n {
            let v = cmi_from_table(&ContingencyCounts::from_dataset(data, &[i, j, 0]));
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    Ok(w)
}

/// Maximum-weight spanning tree over the features, as undirected edges
/// `(i, j)` with `i < j`. Edges are taken greedily by decreasing weight,
/// ties broken by the lexicographically smallest `(i, j)`.
pub fn chow_liu_edges(data: &Dataset) -> Result<Vec<(usize, usize)>> {
    let w = cmi_matrix(data)?;
    let n = data.schema().n_vars();
    let mut candidates: Vec<(usize, usize)> = (1..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    candidates.sort_by(|a, b| {
        w[b.0][b.1]
            .partial_cmp(&w[a.0][a.1])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    });
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(2));
    for (i, j) in candidates {
        if uf.union(i, j) {
            edges.push((i, j));
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

/// Orients an undirected feature forest away from the lowest-index feature
/// of each component and adds the class as a parent of every feature.
fn orient_forest(p: usize, edges: &[(usize, usize)]) -> ParentSets {
    let n = p + 1;
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    let mut parents = naive_parents(p);
    let mut seen = vec![false; n];
    for root in 1..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parents[v].insert(u);
                    queue.push_back(v);
                }
            }
        }
    }
    parents
}

/// TAN by Chow-Liu: the feature tree maximizing total conditional mutual
/// information given the class, rooted at the first feature.
pub fn chow_liu_tan(data: &Dataset) -> Result<Dag> {
    require_records(data)?;
    let p = data.schema().n_features();
    let edges = chow_liu_edges(data)?;
    Dag::from_unordered(data.schema(), &orient_forest(p, &edges))
}

/// Features by decreasing I(X; C), ties by column index.
pub fn class_mi_order(data: &Dataset) -> Result<Vec<usize>> {
    require_records(data)?;
    let n = data.schema().n_vars();
    let mi: Vec<f64> = (1..n)
        .map(|i| class_mutual_information(data, i))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (1..n).collect();
    order.sort_by(|&a, &b| {
        mi[b - 1]
            .partial_cmp(&mi[a - 1])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    Ok(order)
}

/// k-dependence classifier: features enter by decreasing I(X; C) and each
/// takes as parents the (up to) `k` earlier features with the highest
/// I(X_i; X_j | C).
pub fn kdb_mi(data: &Dataset, k: usize) -> Result<Dag> {
    let order = class_mi_order(data)?;
    let w = cmi_matrix(data)?;
    let p = data.schema().n_features();
    let mut parents = naive_parents(p);
    for (pos, &v) in order.iter().enumerate() {
        let mut earlier: Vec<(usize, usize)> = order[..pos].iter().copied().enumerate().collect();
        earlier.sort_by(|a, b| {
            w[v][b.1]
                .partial_cmp(&w[v][a.1])
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        parents[v].extend(earlier.into_iter().take(k).map(|(_, u)| u));
    }
    Dag::from_unordered(data.schema(), &parents)
}

/// BNC family explored by [`greedy_cv_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Feature-feature edges form a forest (each feature has ≤ 1 feature parent).
    Tan,
    /// Each feature has ≤ k feature parents, edges follow the I(X; C) order.
    Kdb(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub smoothing: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            seed: 0,
            smoothing: 1.0,
        }
    }
}

/// Fold index of every record: records of each class are shuffled and the
/// concatenation is dealt round-robin over the folds.
pub fn stratified_folds(data: &Dataset, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = data.schema().class_cardinality();
    let mut by_class = vec![Vec::new(); k];
    for (i, r) in data.rows().enumerate() {
        by_class[r[0]].push(i);
    }
    let mut assign = vec![0; data.n_records()];
    let mut pos = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assign[i] = pos % folds;
            pos += 1;
        }
    }
    assign
}

fn check_folds(cfg: &CvConfig) -> Result<()> {
    if cfg.folds < 2 {
        return Err(Error::Domain(format!(
            "cross-validation needs at least 2 folds, got {}",
            cfg.folds
        )));
    }
    Ok(())
}

fn validate_cv(data: &Dataset, cfg: &CvConfig, fold_of: &[usize]) -> Result<()> {
    if data.n_records() < cfg.folds {
        return Err(Error::Domain(format!(
            "{} records cannot fill {} folds",
            data.n_records(),
            cfg.folds
        )));
    }
    if !(cfg.smoothing >= 0.0 && cfg.smoothing.is_finite()) {
        return Err(Error::Domain(format!("invalid smoothing {}", cfg.smoothing)));
    }
    let k = data.schema().class_cardinality();
    let mut seen = vec![vec![false; cfg.folds]; k];
    for (r, &f) in data.rows().zip(fold_of) {
        seen[r[0]][f] = true;
    }
    for (c, folds) in seen.iter().enumerate() {
        let observed = folds.iter().any(|&s| s);
        let in_some_training = (0..cfg.folds).any(|test| folds.iter().enumerate().any(|(f, &s)| s && f != test));
        if observed && !in_some_training {
            return Err(Error::Domain(format!(
                "class `{}` is absent from every training fold",
                data.schema().variable(0).levels[c]
            )));
        }
    }
    Ok(())
}

/// Mean held-out accuracy over stratified folds of the BN with `structure`,
/// fitted by smoothed maximum likelihood on each training part.
pub fn cross_validated_accuracy(data: &Dataset, structure: &Dag, cfg: &CvConfig) -> Result<f64> {
    check_folds(cfg)?;
    let fold_of = stratified_folds(data, cfg.folds, cfg.seed);
    validate_cv(data, cfg, &fold_of)?;
    let parents = parents_in(structure, data.schema())?;
    Ok(cv_accuracy(data, &parents, &fold_of, cfg))
}

/// Parent sets of `dag` re-indexed to the columns of `target`.
fn parents_in(dag: &Dag, target: &Arc<CategoricalSchema>) -> Result<ParentSets> {
    let map = column_mapping(target, dag.schema())?;
    let mut out = vec![BTreeSet::new(); target.n_vars()];
    for (v, ps) in dag.parent_sets().iter().enumerate() {
        out[map[v]] = ps.iter().map(|&p| map[p]).collect();
    }
    Ok(out)
}

/// Conditional probability tables counted per fold, so that every training
/// split is `total - fold`.
struct FoldTables {
    parents: Vec<Vec<usize>>,
    cards: Vec<usize>,
    // per variable: per fold: n_configs * card counts
    counts: Vec<Vec<Vec<u64>>>,
}

impl FoldTables {
    fn config(&self, v: usize, row: &[usize]) -> usize {
        self.parents[v].iter().fold(0, |acc, &p| acc * self.cards[p] + row[p])
    }

    fn build(data: &Dataset, parents: &ParentSets, fold_of: &[usize], folds: usize) -> Self {
        let cards = data.schema().cardinalities();
        let parents: Vec<Vec<usize>> = parents.iter().map(|s| s.iter().copied().collect()).collect();
        let counts = (0..cards.len())
            .map(|v| {
                let configs: usize = parents[v].iter().map(|&p| cards[p]).product();
                vec![vec![0u64; configs * cards[v]]; folds]
            })
            .collect();
        let mut t = FoldTables { parents, cards, counts };
        for (row, &f) in data.rows().zip(fold_of) {
            for v in 0..t.cards.len() {
                let idx = t.config(v, row) * t.cards[v] + row[v];
                t.counts[v][f][idx] += 1;
            }
        }
        t
    }

    /// Smoothed log-probability tables fitted without fold `held_out`.
    fn log_tables(&self, held_out: usize, alpha: f64) -> Vec<Vec<f64>> {
        (0..self.cards.len())
            .map(|v| {
                let card = self.cards[v];
                let size = self.counts[v][0].len();
                let mut train = vec![0u64; size];
                for (f, fc) in self.counts[v].iter().enumerate() {
                    if f != held_out {
                        for (t, c) in train.iter_mut().zip(fc) {
                            *t += c;
                        }
                    }
                }
                train
                    .chunks_exact(card)
                    .flat_map(|cfg| {
                        let total: u64 = cfg.iter().sum();
                        let den = total as f64 + alpha * card as f64;
                        cfg.iter().map(move |&n| {
                            if total == 0 && alpha == 0.0 {
                                (1.0 / card as f64).ln()
                            } else {
                                ((n as f64 + alpha) / den).ln()
                            }
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

fn cv_accuracy(data: &Dataset, parents: &ParentSets, fold_of: &[usize], cfg: &CvConfig) -> f64 {
    let tables = FoldTables::build(data, parents, fold_of, cfg.folds);
    let k = data.schema().class_cardinality();
    let mut row_buf = Vec::new();
    let mut acc_sum = 0.0;
    let mut used = 0usize;
    for f in 0..cfg.folds {
        let logs = tables.log_tables(f, cfg.smoothing);
        let mut correct = 0usize;
        let mut total = 0usize;
        for (row, _) in data.rows().zip(fold_of).filter(|(_, &g)| g == f) {
            row_buf.clear();
            row_buf.extend_from_slice(row);
            let mut best = (0usize, f64::NEG_INFINITY);
            for c in 0..k {
                row_buf[0] = c;
                let score: f64 = (0..tables.cards.len())
                    .map(|v| logs[v][tables.config(v, &row_buf) * tables.cards[v] + row_buf[v]])
                    .sum();
                if score > best.1 {
                    best = (c, score);
                }
            }
            total += 1;
            if best.0 == row[0] {
                correct += 1;
            }
        }
        if total > 0 {
            acc_sum += correct as f64 / total as f64;
            used += 1;
        }
    }
    acc_sum / used as f64
}

/// Hill-climbing from naive Bayes: each step adds the single feature-feature
/// edge (kept inside `family`) with the largest strict gain in
/// cross-validated accuracy; stops when no edge improves it.
pub fn greedy_cv_search(data: &Dataset, family: Family, cfg: &CvConfig) -> Result<Dag> {
    check_folds(cfg)?;
    let fold_of = stratified_folds(data, cfg.folds, cfg.seed);
    validate_cv(data, cfg, &fold_of)?;
    let p = data.schema().n_features();
    let mi_order = match family {
        Family::Kdb(_) => class_mi_order(data)?,
        Family::Tan => Vec::new(),
    };
    let mut rank = vec![0usize; p + 1];
    for (r, &v) in mi_order.iter().enumerate() {
        rank[v] = r;
    }

    let mut undirected: Vec<(usize, usize)> = Vec::new();
    let mut parents = naive_parents(p);
    let mut current = cv_accuracy(data, &parents, &fold_of, cfg);

    loop {
        let mut candidates: Vec<((usize, usize), ParentSets)> = match family {
            Family::Tan => {
                let mut uf = UnionFind::new(p + 1);
                for &(i, j) in &undirected {
                    uf.union(i, j);
                }
                let mut out = Vec::new();
                for i in 1..=p {
                    for j in i + 1..=p {
                        if uf.find(i) != uf.find(j) {
                            let mut e = undirected.clone();
                            e.push((i, j));
                            out.push(((i, j), orient_forest(p, &e)));
                        }
                    }
                }
                out
            }
            Family::Kdb(k) => {
                let mut out = Vec::new();
                for &v in &mi_order {
                    if parents[v].len() > k {
                        continue;
                    }
                    for &u in &mi_order[..rank[v]] {
                        if !parents[v].contains(&u) {
                            let mut ps = parents.clone();
                            ps[v].insert(u);
                            out.push(((u, v), ps));
                        }
                    }
                }
                out
            }
        };
        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|(_, ps)| cv_accuracy(data, ps, &fold_of, cfg))
            .collect();
        let mut best: Option<usize> = None;
        for (i, &s) in scores.iter().enumerate() {
            let better = match best {
                None => true,
                Some(b) => s > scores[b] || (s == scores[b] && candidates[i].0 < candidates[b].0),
            };
            if better {
                best = Some(i);
            }
        }
        match best {
            Some(b) if scores[b] > current => {
                current = scores[b];
                let (edge, ps) = candidates.swap_remove(b);
                if family == Family::Tan {
                    undirected.push(edge);
                }
                parents = ps;
            }
            _ => break,
        }
    }

    let dag = Dag::from_unordered(data.schema(), &parents)?;
    match family {
        Family::Tan => assert!(dag.is_kdb_structure(1), "forest constraint violated"),
        Family::Kdb(k) => assert!(dag.is_kdb_structure(k), "in-degree constraint violated"),
    }
    Ok(dag)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut x = x;
        while self.parent[x] != r {
            let next = self.parent[x];
            self.parent[x] = r;
            x = next;
        }
        r
    }

    /// Joins the sets of `a` and `b`; false if already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
